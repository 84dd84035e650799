// Acceptance checks, one PASS/FAIL line each. Exit status is nonzero when
// any check fails.

#include "carnotflow/field_calculus.hpp"
#include "carnotflow/flow_solver.hpp"
#include "carnotflow/graph_geometry.hpp"
#include "carnotflow/group_algebra.hpp"
#include "carnotflow/oracles.hpp"
#include "carnotflow/viscosity_toolkit.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace carnotflow;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Point random_point(const GroupSpec& g, std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> d(-r, r);
  Vec v(g.m1()), z(g.m2());
  for (int i = 0; i < g.m1(); ++i) v[i] = d(rng);
  for (int k = 0; k < g.m2(); ++k) z[k] = d(rng);
  return make_point(g, v, z);
}

double coord_dist(const Point& a, const Point& b) {
  return (to_coordinates(a) - to_coordinates(b)).cwiseAbs().maxCoeff();
}

// 1 -----------------------------------------------------------------------
Outcome cylinder() {
  const GroupSpec h = make_heisenberg(1);
  const ExactSolution c = shrinking_cylinder(h, 1.0);
  const auto m0 = cylinder_points(h, 1.0, 100);
  double res = 0.0, ss = 0.0;
  std::mt19937_64 rng(21);
  for (double t : {0.0, 0.1, 0.25, 0.4}) {
    for (int i = 0; i < 100; ++i) {
      const Vec x = c.sample_point(rng, t);
      res = std::max(res, std::abs(c.residual(x, t)));
    }
    ss = std::max(ss, self_similarity_check(h, 1.0, t, m0).max_abs_u);
  }
  return {res <= 1e-9 && ss <= 1e-10, fmt("max residual %.2e (tol 1e-9), self-similarity %.2e (tol 1e-10)", res, ss)};
}

// 2 -----------------------------------------------------------------------
double grim_error(int nodes) {
  const ExactSolution gr = grim_reaper();
  const Grid g = Grid::for_group(gr.spec, {-1.2}, {1.2}, {nodes});
  FlowProblem p{gr.spec, ScalarField::sample(g, [&](const Vec& x) { return gr.value(x, 0.0); }, 0.0),
                [&](const Vec& x, double t) { return gr.value(x, t); }, FlowVariant::det_plus, 0.1};
  const ScalarField u = run(p).final_state();
  double e = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) e = std::max(e, std::abs(u[n] - gr.value(g.coords(n), 0.1)));
  return e;
}

Outcome grim_convergence() {
  const double e1 = grim_error(51), e2 = grim_error(101), e3 = grim_error(201);
  const double r1 = e1 / e2, r2 = e2 / e3;
  return {e3 <= 1e-3 && r1 >= 3 && r2 >= 3,
          fmt("errors %.3e %.3e %.3e at 51/101/201 nodes", e1, e2, e3) + fmt(", ratios %.2f %.2f (>= 3)", r1, r2)};
}

// 3 -----------------------------------------------------------------------
Outcome operators() {
  // Quadratics in (v, z): the stencils are exact on them, so any mismatch
  // comes from assembling the horizontal derivatives.
  const std::vector<std::function<double(const Vec&)>> fns = {
      [](const Vec& x) { return x.squaredNorm(); },
      [](const Vec& x) { return x[0] * x[x.size() - 1] + 0.5 * x[1]; },
      [](const Vec& x) { return 3 * x[x.size() - 1] * x[x.size() - 1] - x[0] * x[1] + 2; },
      [](const Vec& x) { return x[1] * x[x.size() - 1] - 0.7 * x[0] * x[0]; },
      [](const Vec& x) { return 1.5 * x[0] - x[x.size() - 1] + 0.25 * (x[0] + x[1]) * (x[0] - x[x.size() - 1]); }};
  double worst = 0.0;
  std::mt19937_64 rng(31);
  for (const GroupSpec& g : {make_heisenberg(1), make_heisenberg(2), make_euclidean(3)}) {
    const int d = g.dim();
    const Grid grid = Grid::for_group(g, std::vector<double>(d, -1.0), std::vector<double>(d, 1.0), std::vector<int>(d, 7));
    std::vector<std::size_t> nodes;
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    while (nodes.size() < 20) {
      const std::size_t n = pick(rng);
      if (grid.is_interior(n)) nodes.push_back(n);
    }
    for (const auto& f : fns) {
      const ScalarField u = ScalarField::sample(grid, f);
      const VectorField d0 = horizontal_gradient(g, u);
      const SymMatrixField d2 = horizontal_hessian(g, u);
      const SmoothFunction sf = [&](const Point& p) { return f(to_coordinates(p)); };
      for (std::size_t n : nodes) {
        const Point p = from_coordinates(g, grid.coords(n));
        worst = std::max(worst, (d0.at(n) - oracle_horizontal_gradient(g, sf, p)).cwiseAbs().maxCoeff());
        worst = std::max(worst, (d2.at(n) - oracle_horizontal_hessian(g, sf, p)).cwiseAbs().maxCoeff());
      }
    }
  }
  return {worst <= 1e-6, fmt("max deviation from the derivative oracle %.2e (tol 1e-6)", worst)};
}

// 4 -----------------------------------------------------------------------
// Eigenvalues by bisection on the sign changes of the leading principal
// minors of M - x I (a Sturm sequence for symmetric matrices).
int count_below(const Mat& m, double x) {
  const int n = static_cast<int>(m.rows());
  Mat a = m - x * Mat::Identity(n, n);
  const double tiny = 1e-300;
  int neg = 0;
  for (int k = 0; k < n; ++k) {
    double piv = a(k, k);
    if (piv == 0.0) piv = -tiny;
    if (piv < 0) ++neg;
    for (int i = k + 1; i < n; ++i) {
      const double l = a(i, k) / piv;
      for (int j = k + 1; j < n; ++j) a(i, j) -= l * a(k, j);
    }
  }
  return neg;
}

std::vector<double> bisection_eigenvalues(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  const double bound = m.norm() + 1.0;
  std::vector<double> ev;
  for (int k = 0; k < n; ++k) {
    double lo = -bound, hi = bound;  // count_below(lo) <= k < count_below(hi)
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (count_below(m, mid) > k ? hi : lo) = mid;
    }
    ev.push_back(0.5 * (lo + hi));
  }
  return ev;
}

Outcome det_plus_oracle() {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> d(-1, 1);
  double worst = 0.0;
  int nonzero = 0;
  for (int t = 0; t < 10000; ++t) {
    const int n = 2 + t % 3;
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = d(rng);
    // half general symmetric, half positive definite so the products are not all zero
    const Mat m = (t / 3) % 2 == 0 ? Mat(a + a.transpose()) : Mat(a * a.transpose() + 0.05 * Mat::Identity(n, n));
    const double floor = 1e-12 * m.norm();
    double ref = 1.0;
    for (double l : bisection_eigenvalues(m)) ref *= l <= floor ? 0.0 : l;
    const double got = det_plus(m);
    if (ref != 0.0) ++nonzero;
    const double scale = std::max(std::abs(ref), std::abs(got));
    if (scale > 0) worst = std::max(worst, std::abs(got - ref) / scale);
  }
  return {worst <= 1e-10, fmt("max relative deviation %.2e over 10000 matrices (%.0f with nonzero det_+), tol 1e-10",
                              worst, nonzero)};
}

// 5 -----------------------------------------------------------------------
Outcome htype_suite() {
  double dev = 0.0;
  std::string per;
  int seed = 51;
  for (const GroupSpec& g : {make_heisenberg(1), make_heisenberg(2), make_quaternionic()}) {
    const IdentityReport r = htype_identities_check(g, random_points(g, 1000, 1.0, static_cast<std::uint64_t>(seed++)));
    dev = std::max(dev, r.max_dev());
    per += fmt(" %.1e", r.max_dev());
  }
  const GroupSpec h = make_heisenberg(1);
  const BarrierSpec b{htype_barrier(h), 1.0, 0.0, {}};
  const BarrierReport r10 = barrier_validate(h, b, 10.0, 10000, 5);
  const BarrierReport r20 = barrier_validate(h, b, 20.0, 10000, 6);
  const double change = std::abs(r20.max_ratio - r10.max_ratio) / r10.max_ratio;
  const bool ok = dev <= 1e-6 && std::isfinite(r10.max_ratio) && std::isfinite(r20.max_ratio) && change < 0.05 &&
                  r10.lower_bound_holds && r20.lower_bound_holds;
  return {ok, "identity deviations" + per + fmt(" (tol 1e-6); barrier ratio sup %.5f (R=10) %.5f (R=20), change %.2e",
                                                r10.max_ratio, r20.max_ratio, change)};
}

// 6 -----------------------------------------------------------------------
Outcome convexity_preservation() {
  const GroupSpec h = make_heisenberg(1);
  const Grid g = Grid::for_group(h, {-1, -1, -1}, {1, 1, 1}, {21, 21, 21});
  auto u0 = [](const Vec& x) { return x[0] * x[0] + x[1] * x[1] + 0.1 * x[2] * x[2]; };
  FlowProblem p{h, ScalarField::sample(g, u0, 0.0), [u0](const Vec& x, double t) { return u0(x) + t; },
                FlowVariant::det_plus, 0.2};
  const FlowTrace tr = run(p);
  double lo = 1e300;
  for (const auto& s : tr.series) lo = std::min(lo, s.min_eig);
  return {lo > 0.0, fmt("min eigenvalue of the horizontal Hessian over %.0f recorded steps: %.4f (must stay > 0)",
                        static_cast<double>(tr.series.size()), lo)};
}

// 7 -----------------------------------------------------------------------
Outcome comparison() {
  const GroupSpec h = make_heisenberg(1);
  const Grid g = Grid::for_group(h, {-1, -1, -1}, {1, 1, 1}, {17, 17, 17});
  auto a0 = [](const Vec& x) { return x[0] * x[0] + x[1] * x[1]; };
  auto b0 = [](const Vec& x) {
    const double r = x[0] * x[0] + x[1] * x[1];
    return r + 0.25 * r * r;
  };
  FlowProblem pa{h, ScalarField::sample(g, a0, 0.0), {}, FlowVariant::det_plus, 0.1};
  FlowProblem pb{h, ScalarField::sample(g, b0, 0.0), {}, FlowVariant::det_plus, 0.1};
  pa.snapshot_interval = pb.snapshot_interval = 0.01;
  const FlowTrace ta = run(pa), tb = run(pb);
  const OrderingReport r = compare_runs(ta, tb, 1e-6);
  return {r.ordered, fmt("%.0f matched snapshots, max(u_a - u_b) = %.3e (tol 1e-6)",
                         static_cast<double>(ta.snapshots.size()), r.max_violation)};
}

// 8 -----------------------------------------------------------------------
Outcome viscosity_contracts() {
  const GroupSpec h = make_heisenberg(1);
  std::string notes;
  bool ok = true;

  // convolutions on random fields
  {
    const Grid g = Grid::for_group(h, {-1, -1, -1}, {1, 1, 1}, {5, 5, 5});
    std::mt19937_64 rng(81);
    std::uniform_real_distribution<double> d(-1, 1);
    bool conv = true;
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<double> vals(g.size() * 3);
      for (double& x : vals) x = d(rng);
      const SpaceTimeField w(g, {0.0, 0.2, 0.4}, vals);
      const SpaceTimeField s1 = sup_convolution(h, w, 0.02), s2 = sup_convolution(h, w, 0.2);
      const SpaceTimeField i1 = inf_convolution(h, w, 0.02), i2 = inf_convolution(h, w, 0.2);
      for (std::size_t k = 0; k < vals.size(); ++k)
        conv = conv && s1.values()[k] >= vals[k] && s2.values()[k] >= s1.values()[k] && i1.values()[k] <= vals[k] &&
               i2.values()[k] <= i1.values()[k];
    }
    ok = ok && conv;
    notes += conv ? "convolutions ok" : "convolutions FAIL";
  }

  // strictify against its closed form
  {
    const Grid g({0}, {1}, {5});
    std::vector<double> times;
    for (int k = 0; k <= 500; ++k) times.push_back(0.001 * k);
    const SpaceTimeField w = SpaceTimeField::sample(g, times, [](const Vec& x, double t) { return x[0] * x[0] + t; });
    const double eps = 0.1, T = 1.0;
    const SpaceTimeField s = strictify(w, eps, T);
    const GroupSpec e1 = make_euclidean(1);
    const ResidualReport before = residual_classify(e1, w, FlowVariant::det_plus, 1e-12);
    const ResidualReport after = residual_classify(e1, s, FlowVariant::det_plus, 1e-12);
    double value_dev = 0.0, margin_dev = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k)
      for (std::size_t n = 0; n < g.size(); ++n) {
        value_dev = std::max(value_dev, std::abs(w.value(n, k) - s.value(n, k) - eps / (T - times[k])));
        if (!g.is_interior(n)) continue;
        const double drop = before.residual[k * g.size() + n] - after.residual[k * g.size() + n];
        const double m = strictify_margin(eps, T, times[k]);
        margin_dev = std::max(margin_dev, std::abs(drop - m) / m);
      }
    const bool st = value_dev <= 1e-12 && margin_dev <= 1e-4;
    ok = ok && st;
    notes += fmt("; strictify value dev %.1e, margin rel dev %.1e", value_dev, margin_dev);
  }

  // rescaled subsolutions
  {
    const std::pair<double, double> pairs[] = {{0.5, 0.5}, {0.9, 0.8}, {0.7, 0.49}, {0.95, 0.3}, {0.6, 0.6}};
    const GroupSpec e1 = make_euclidean(1);
    const ExactSolution gr = grim_reaper();
    const Grid line = Grid::for_group(e1, {-1.2}, {1.2}, {121});
    const std::vector<double> times = {0.0, 0.05, 0.1, 0.15, 0.2};
    const SpaceTimeField ug = SpaceTimeField::sample(line, times, gr.value);
    const Grid box = Grid::for_group(h, {-1, -1, -1}, {1, 1, 1}, {9, 9, 9});
    const SpaceTimeField us = SpaceTimeField::sample(
        box, times, [](const Vec& x, double) { return x[0] * x[0] + x[1] * x[1] + 0.1 * x[2] * x[2]; });
    bool sc = true;
    for (const auto& [mu, theta] : pairs) {
      if (!scaling_admissible(2, mu, theta)) sc = false;
      sc = sc && residual_classify(e1, scale_subsolution(ug, 1, mu, theta), FlowVariant::det_plus, 1e-9).all_sub();
      sc = sc && residual_classify(h, scale_subsolution(us, 2, mu, theta), FlowVariant::det_plus, 1e-9).all_sub();
    }
    ok = ok && sc;
    notes += sc ? "; scaling ok" : "; scaling FAIL";
  }

  // Perron sandwich with the H-type barrier
  {
    const SmoothFunction h0 = htype_barrier(h);
    const Grid g = Grid::for_group(h, {-1, -1, -1}, {1, 1, 1}, {13, 13, 13});
    const SmoothFunction hh = [h0](const Point& p) { return 0.25 * h0(p); };
    const BarrierReport br = barrier_validate(h, {h0, 1.0, 0.0, {}}, 10.0, 2000, 8);
    BarrierSpec b{h0, 1.0, br.suggested_C, {{0.05, 0.0}, {0.1, 0.0}, {0.2, 0.0}}};
    std::vector<Point> pts;
    for (std::size_t n = 0; n < g.size(); ++n) pts.push_back(from_coordinates(h, g.coords(n)));
    for (auto& [eps, B] : b.B_table) {
      for (const Point& x : pts) {
        std::vector<std::pair<Point, Point>> row;
        for (const Point& xi : pts) row.emplace_back(x, xi);
        B = std::max(B, estimate_modulus(h, hh, h0, eps, row).B);
      }
    }
    const double T = 0.01;
    std::vector<double> times;
    for (int k = 0; k <= 5; ++k) times.push_back(T * k / 5);
    const PerronSandwich ps = perron_sandwich(h, hh, b, g, times);
    double init_lo = 0.0, init_hi = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      init_lo = std::min(init_lo, ps.f.value(n, 0) - ps.z.value(n, 0));
      init_hi = std::max(init_hi, ps.f.value(n, 0) - ps.z.value(n, 0) - ps.min_eps());
    }
    FlowProblem p{h, ps.z.slice(0), [&](const Vec& x, double t) { return ps.f_at(nearest_node(g, x), t); },
                  FlowVariant::det_plus, T};
    p.snapshot_interval = T / 5;
    const FlowTrace tr = run(p);
    double below = 0.0, above = 0.0;
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k)
      for (std::size_t n = 0; n < g.size(); ++n) {
        const double u = tr.snapshots[k][n], t = *tr.snapshots[k].time();
        below = std::max(below, ps.z.value(n, 0) - u);
        above = std::max(above, u - ps.f_at(n, t));
      }
    const bool pe = ps.feasible && init_lo >= -1e-12 && init_hi <= 1e-12 && below <= 1e-9 && above <= 1e-9 &&
                    tr.snapshots.size() == times.size();
    ok = ok && pe;
    notes += fmt("; Perron: f(.,0)-h in [%.1e, min eps + %.1e], max(z-u) %.1e, max(u-f) %.1e", init_lo, init_hi, below,
                 above);
    notes += fmt(" with C=%.3f, B=(%.3g, %.3g, %.3g)", b.C, b.B_table[0].second, b.B_table[1].second,
                 b.B_table[2].second);
  }
  return {ok, notes};
}

// 9 -----------------------------------------------------------------------
Outcome group_algebra() {
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> sd(0.1, 3.0);
  double worst = 0.0;
  const std::vector<GroupSpec> groups = {make_euclidean(3), make_heisenberg(1), make_heisenberg(2), make_quaternionic(),
                                         adjoin_real_line(make_heisenberg(1))};
  for (const GroupSpec& g : groups) {
    const Point e = identity(g);
    for (int n = 0; n < 1000; ++n) {
      const Point a = random_point(g, rng, 2), b = random_point(g, rng, 2), c = random_point(g, rng, 2);
      const double s = sd(rng);
      worst = std::max(worst, coord_dist(product(g, product(g, a, b), c), product(g, a, product(g, b, c))));
      worst = std::max(worst, coord_dist(product(g, a, e), a));
      worst = std::max(worst, coord_dist(product(g, e, a), a));
      worst = std::max(worst, coord_dist(product(g, a, inverse(g, a)), e));
      worst = std::max(worst, coord_dist(product(g, inverse(g, a), a), e));
      worst = std::max(worst, coord_dist(dilate(g, s, product(g, a, b)), product(g, dilate(g, s, a), dilate(g, s, b))));
      worst = std::max(worst, std::abs(gauge_norm(g, dilate(g, s, a)) - s * gauge_norm(g, a)));
      // left invariance: X_i(a b) = dL_a(b) X_i(b), the differential by central differences
      const Vec x = to_coordinates(b);
      const Mat fab = frame(g, product(g, a, b)).a, fb = frame(g, b).a;
      Mat dl(g.dim(), g.dim());
      for (int col = 0; col < g.dim(); ++col) {
        Vec xp = x, xm = x;
        xp[col] += 1e-3;
        xm[col] -= 1e-3;
        dl.col(col) = (to_coordinates(product(g, a, from_coordinates(g, xp))) -
                       to_coordinates(product(g, a, from_coordinates(g, xm)))) / 2e-3;
      }
      for (int i = 0; i < g.m1(); ++i)
        worst = std::max(worst, (fab.row(i).transpose() - dl * fb.row(i).transpose()).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-8, fmt("max defect %.2e over 1000 samples in each of 5 groups (tol 1e-8)", worst)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)();
    double budget;  // seconds, 0 when untimed
  };
  const Criterion all[] = {
      {1, "cylinder exactness", cylinder, 1.0},
      {2, "graph-flow convergence", grim_convergence, 10.0},
      {3, "horizontal operators", operators, 0.0},
      {4, "det_+ oracle equivalence", det_plus_oracle, 0.0},
      {5, "H-type identities and barrier", htype_suite, 0.0},
      {6, "convexity preservation", convexity_preservation, 60.0},
      {7, "comparison principle", comparison, 0.0},
      {8, "viscosity toolkit contracts", viscosity_contracts, 0.0},
      {9, "group algebra", group_algebra, 0.0},
  };
  int failures = 0;
  for (const auto& c : all) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::string timing;
    if (c.budget > 0) {
      timing = fmt(" [%.2f s, budget %.0f s]", secs, c.budget);
      if (secs >= c.budget) {
        o.pass = false;
        timing += " over budget";
      }
    }
    std::printf("criterion %d %-32s %s  %s%s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
