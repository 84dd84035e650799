#include "carnotflow/viscosity_toolkit.hpp"

#include "carnotflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace carnotflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Point> node_points(const GroupSpec& spec, const Grid& grid) {
  std::vector<Point> pts;
  pts.reserve(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) pts.push_back(from_coordinates(spec, grid.coords(n)));
  return pts;
}

// Three-point derivative weights on a possibly non-uniform stencil.
void time_weights(const std::vector<double>& t, std::size_t k, std::size_t& first, double w[3]) {
  const std::size_t n = t.size();
  if (k == 0) {
    first = 0;
    const double h1 = t[1] - t[0], h2 = t[2] - t[1];
    w[0] = -(2 * h1 + h2) / (h1 * (h1 + h2));
    w[1] = (h1 + h2) / (h1 * h2);
    w[2] = -h1 / (h2 * (h1 + h2));
  } else if (k == n - 1) {
    first = n - 3;
    const double h1 = t[n - 2] - t[n - 3], h2 = t[n - 1] - t[n - 2];
    w[0] = h2 / (h1 * (h1 + h2));
    w[1] = -(h1 + h2) / (h1 * h2);
    w[2] = (2 * h2 + h1) / (h2 * (h1 + h2));
  } else {
    first = k - 1;
    const double h1 = t[k] - t[k - 1], h2 = t[k + 1] - t[k];
    w[0] = -h2 / (h1 * (h1 + h2));
    w[1] = (h2 - h1) / (h1 * h2);
    w[2] = h1 / (h2 * (h1 + h2));
  }
}

SpaceTimeField convolve(const GroupSpec& spec, const SpaceTimeField& w, double eps, double sign) {
  if (!(eps > 0.0)) throw std::invalid_argument("convolution parameter must be positive");
  const Grid& g = w.grid();
  const std::vector<Point> pts = node_points(spec, g);
  const std::size_t nn = g.size(), nt = w.time_count();
  const auto& times = w.times();
  // Kernel in space depends only on the node pair.
  std::vector<double> kernel(nn * nn);
  parallel_for(nn, [&](std::size_t x) {
    for (std::size_t y = 0; y < nn; ++y)
      kernel[x * nn + y] = gauge_norm_power(spec, product(spec, inverse(spec, pts[y]), pts[x])) / (2.0 * eps);
  });
  std::vector<double> out(nn * nt);
  parallel_for(nn * nt, [&](std::size_t idx) {
    const std::size_t k = idx / nn, x = idx % nn;
    double best = sign * w.value(x, k);
    for (std::size_t s = 0; s < nt; ++s) {
      const double dt = times[k] - times[s];
      const double tk = dt * dt / (2.0 * eps);
      for (std::size_t y = 0; y < nn; ++y) {
        const double cand = sign * w.value(y, s) - kernel[x * nn + y] - tk;
        if (cand > best) best = cand;
      }
    }
    out[idx] = sign * best;
  });
  return SpaceTimeField(g, times, std::move(out));
}

Point random_gauge_point(const GroupSpec& spec, double r, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec v(spec.m1()), z(spec.m2());
  for (int i = 0; i < spec.m1(); ++i) v[i] = normal(rng);
  for (int k = 0; k < spec.m2(); ++k) z[k] = normal(rng);
  v.normalize();
  if (spec.m2() == 0) return make_point(spec, r * v, z);
  z.normalize();
  // |v|^4 = a r^4, |z|^2 = (1 - a) r^4
  const double a = unit(rng);
  return make_point(spec, std::pow(a, 0.25) * r * v, std::sqrt(1.0 - a) * r * r * z);
}

double relative_dev(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

}  // namespace

SpaceTimeField::SpaceTimeField(Grid grid, std::vector<double> times, std::vector<double> values)
    : grid_(std::move(grid)), times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty()) throw std::invalid_argument("space-time field needs at least one time");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1])) throw std::invalid_argument("times must be strictly increasing");
  if (values_.size() != grid_.size() * times_.size())
    throw std::invalid_argument("space-time field has the wrong number of values");
  for (double x : values_)
    if (!std::isfinite(x)) throw std::invalid_argument("space-time field values must be finite");
}

SpaceTimeField SpaceTimeField::sample(const Grid& grid, const std::vector<double>& times,
                                      const std::function<double(const Vec&, double)>& fn) {
  std::vector<double> vals(grid.size() * times.size());
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t n = 0; n < grid.size(); ++n) vals[k * grid.size() + n] = fn(grid.coords(n), times[k]);
  return SpaceTimeField(grid, times, std::move(vals));
}

SpaceTimeField SpaceTimeField::from_trace(const FlowTrace& trace) {
  if (trace.snapshots.empty()) throw std::invalid_argument("empty trace");
  const Grid& g = trace.snapshots.front().grid();
  std::vector<double> times, vals;
  for (const auto& s : trace.snapshots) {
    times.push_back(s.time().value_or(0.0));
    vals.insert(vals.end(), s.values().begin(), s.values().end());
  }
  return SpaceTimeField(g, std::move(times), std::move(vals));
}

ScalarField SpaceTimeField::slice(std::size_t k) const {
  const auto first = values_.begin() + static_cast<std::ptrdiff_t>(k * grid_.size());
  return ScalarField(grid_, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(grid_.size())),
                     times_[k]);
}

double SpaceTimeField::at_time(std::size_t node, double t) const {
  const double span = 1e-12 * std::max(1.0, std::abs(times_.back()));
  if (t < times_.front() - span || t > times_.back() + span) throw std::out_of_range("time outside field span");
  if (times_.size() == 1) return value(node, 0);
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  k = std::min(k, times_.size() - 2);
  const double s = std::clamp((t - times_[k]) / (times_[k + 1] - times_[k]), 0.0, 1.0);
  return (1.0 - s) * value(node, k) + s * value(node, k + 1);
}

std::string to_string(ResidualClass c) {
  switch (c) {
    case ResidualClass::solution: return "solution";
    case ResidualClass::sub: return "sub";
    case ResidualClass::super: return "super";
    case ResidualClass::neither: return "neither";
    case ResidualClass::excluded: return "excluded";
  }
  return "unknown";
}

ResidualReport residual_classify(const GroupSpec& spec, const SpaceTimeField& u, FlowVariant variant,
                                 double tol) {
  const Grid& g = u.grid();
  const std::size_t nn = g.size(), nt = u.time_count();
  if (nt < 3) throw std::invalid_argument("residual classification needs three time samples");
  ResidualReport r{std::vector<double>(nn * nt, std::numeric_limits<double>::quiet_NaN()),
                   std::vector<ResidualClass>(nn * nt, ResidualClass::excluded), -kInf, kInf, {0, 0, 0, 0, 0}};
  for (std::size_t k = 0; k < nt; ++k) {
    const FlowOperatorSample op = evaluate_flow_operator(spec, u.slice(k), variant);
    std::size_t first;
    double w[3];
    time_weights(u.times(), k, first, w);
    for (std::size_t n = 0; n < nn; ++n) {
      const std::size_t idx = k * nn + n;
      if (!g.is_interior(n)) continue;
      const double ut = w[0] * u.value(n, first) + w[1] * u.value(n, first + 1) + w[2] * u.value(n, first + 2);
      const double res = ut - op.rhs[n];
      r.residual[idx] = res;
      if (!std::isfinite(res))
        r.classes[idx] = ResidualClass::neither;
      else if (std::abs(res) <= tol)
        r.classes[idx] = ResidualClass::solution;
      else
        r.classes[idx] = res < 0.0 ? ResidualClass::sub : ResidualClass::super;
      if (std::isfinite(res)) {
        r.max_residual = std::max(r.max_residual, res);
        r.min_residual = std::min(r.min_residual, res);
      }
    }
  }
  for (ResidualClass c : r.classes) ++r.counts[static_cast<int>(c)];
  return r;
}

SpaceTimeField sup_convolution(const GroupSpec& spec, const SpaceTimeField& w, double eps) {
  return convolve(spec, w, eps, 1.0);
}

SpaceTimeField inf_convolution(const GroupSpec& spec, const SpaceTimeField& v, double eps) {
  return convolve(spec, v, eps, -1.0);
}

double strictify_margin(double eps, double T, double t) { return eps / ((T - t) * (T - t)); }

SpaceTimeField strictify(const SpaceTimeField& w, double eps, double T) {
  if (eps < 0.0) throw std::invalid_argument("strictify: eps must be nonnegative");
  if (w.times().back() >= T) throw std::invalid_argument("strictify: every sample time must be below T");
  std::vector<double> vals = w.values();
  const std::size_t nn = w.grid().size();
  for (std::size_t k = 0; k < w.time_count(); ++k)
    for (std::size_t n = 0; n < nn; ++n) vals[k * nn + n] -= eps / (T - w.times()[k]);
  return SpaceTimeField(w.grid(), w.times(), std::move(vals));
}

bool scaling_admissible(int m1, double mu, double theta) {
  if (!(mu > 0.0 && mu <= 1.0 && theta > 0.0 && theta <= 1.0)) return false;
  return theta * std::pow(mu, -(m1 - 1)) <= 1.0 + 1e-12;
}

SpaceTimeField scale_subsolution(const SpaceTimeField& u, int m1, double mu, double theta) {
  if (!scaling_admissible(m1, mu, theta))
    throw std::invalid_argument("scale_subsolution: need mu, theta in (0, 1] and theta mu^{-(m1-1)} <= 1");
  const auto& times = u.times();
  if (theta * times.front() < times.front() - 1e-12)
    throw std::invalid_argument("scale_subsolution: theta t_0 precedes the first sample");
  const std::size_t nn = u.grid().size();
  std::vector<double> vals(u.values().size());
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t n = 0; n < nn; ++n) vals[k * nn + n] = mu * u.at_time(n, theta * times[k]);
  return SpaceTimeField(u.grid(), times, std::move(vals));
}

SmoothFunction htype_barrier(const GroupSpec& spec) {
  if (!spec.is_htype()) throw std::invalid_argument("htype_barrier needs an H-type group");
  return [](const Point& p) {
    const double v2 = p.v.squaredNorm();
    return v2 * v2 + 16.0 * p.z.squaredNorm();
  };
}

double barrier_ratio(const GroupSpec& spec, const SmoothFunction& h0, const Point& p, const OracleOptions& opts) {
  const Vec grad = oracle_horizontal_gradient(spec, h0, p, opts);
  const Mat hess = oracle_horizontal_hessian(spec, h0, p, opts);
  return det_plus(hess) / std::pow(1.0 + grad.squaredNorm(), 0.5 * (spec.m1() + 1));
}

nlohmann::json to_json(const BarrierReport& r) {
  auto point = [](const Point& p) {
    return nlohmann::json{{"v", std::vector<double>(p.v.data(), p.v.data() + p.v.size())},
                          {"z", std::vector<double>(p.z.data(), p.z.data() + p.z.size())}};
  };
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [e, b] : r.B_table) table.push_back({e, b});
  nlohmann::json j{{"max_ratio", r.max_ratio},        {"witness", point(r.witness)},
                   {"B_table", table},                {"feasible", r.feasible()},
                   {"lower_bound_holds", r.lower_bound_holds}, {"smooth", r.smooth},
                   {"curvature_bound_holds", r.curvature_bound_holds}, {"suggested_C", r.suggested_C}};
  if (r.lower_bound_witness) j["lower_bound_witness"] = point(*r.lower_bound_witness);
  if (r.smoothness_witness) j["smoothness_witness"] = point(*r.smoothness_witness);
  return j;
}

BarrierReport barrier_validate(const GroupSpec& spec, const BarrierSpec& barrier, double radius, int n,
                               std::uint64_t seed) {
  if (!(radius > 0.0) || n <= 0) throw std::invalid_argument("barrier_validate: need radius > 0 and n > 0");
  if (!(barrier.eps0 > 0.0)) throw std::invalid_argument("barrier_validate: eps0 must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r_min = std::min(1e-3, radius);
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double r = r_min * std::pow(radius / r_min, unit(rng));
    pts.push_back(random_gauge_point(spec, r, rng));
  }

  BarrierReport rep;
  rep.B_table = barrier.B_table;
  rep.witness = identity(spec);
  std::vector<double> ratio(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) { ratio[i] = barrier_ratio(spec, barrier.h0, pts[i]); });
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double lower = barrier.eps0 * gauge_norm_power(spec, pts[i]);
    if (rep.lower_bound_holds && barrier.h0(pts[i]) < lower * (1.0 - 1e-12)) {
      rep.lower_bound_holds = false;
      rep.lower_bound_witness = pts[i];
    }
    if (ratio[i] > rep.max_ratio) {
      rep.max_ratio = ratio[i];
      rep.witness = pts[i];
    }
  }

  // Compass search from the five best samples, staying inside the gauge ball.
  std::vector<std::size_t> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t top = std::min<std::size_t>(5, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) { return ratio[a] > ratio[b]; });
  for (std::size_t t = 0; t < top; ++t) {
    Vec x = to_coordinates(pts[order[t]]);
    double best = ratio[order[t]];
    double h = 0.1 * std::max(gauge_norm(spec, pts[order[t]]), 1e-3);
    for (int iter = 0; iter < 60 && h > 1e-7; ++iter) {
      bool moved = false;
      for (int d = 0; d < x.size() && !moved; ++d)
        for (double sgn : {1.0, -1.0}) {
          Vec y = x;
          y[d] += sgn * h;
          const Point q = from_coordinates(spec, y);
          if (gauge_norm(spec, q) > radius) continue;
          const double val = barrier_ratio(spec, barrier.h0, q);
          if (val > best) {
            best = val;
            x = y;
            moved = true;
            break;
          }
        }
      if (!moved) h *= 0.5;
    }
    if (best > rep.max_ratio) {
      rep.max_ratio = best;
      rep.witness = from_coordinates(spec, x);
    }
  }

  // Smoothness: the oracle Hessian must not move when the step shrinks.
  std::vector<Point> probe;
  for (int i = 0; i < 20; ++i) probe.push_back(random_gauge_point(spec, 0.005 + 0.025 * unit(rng), rng));
  probe.push_back(rep.witness);
  OracleOptions coarse, fine;
  fine.step = coarse.step / 16.0;
  for (const Point& p : probe) {
    const Mat a = oracle_horizontal_hessian(spec, barrier.h0, p, coarse);
    const Mat b = oracle_horizontal_hessian(spec, barrier.h0, p, fine);
    if ((a - b).norm() > 1e-4 * (1.0 + b.norm())) {
      rep.smooth = false;
      rep.smoothness_witness = p;
      break;
    }
  }

  rep.suggested_C = 1.1 * rep.max_ratio;
  rep.curvature_bound_holds = barrier.C == 0.0 || rep.max_ratio <= barrier.C;
  return rep;
}

double IdentityReport::max_dev() const { return std::max({gradient_dev, hessian_dev, bracket_dev}); }

nlohmann::json to_json(const IdentityReport& r) {
  return {{"gradient_dev", r.gradient_dev},
          {"hessian_dev", r.hessian_dev},
          {"bracket_dev", r.bracket_dev},
          {"gradient_dev_squared_form", r.gradient_dev_squared},
          {"gradient_dev_fourth_power_form", r.gradient_dev_fourth},
          {"samples", r.samples},
          {"max_dev", r.max_dev()}};
}

IdentityReport htype_identities_check(const GroupSpec& spec, const std::vector<Point>& samples,
                                      const OracleOptions& opts) {
  const SmoothFunction h0 = htype_barrier(spec);
  const int m1 = spec.m1();
  IdentityReport rep;
  rep.samples = samples.size();
  rep.worst = samples.empty() ? identity(spec) : samples.front();
  double worst = -1.0;
  for (const Point& p : samples) {
    const Vec& v = p.v;
    const double v2 = v.squaredNorm();
    const double h = h0(p);
    const double g2 = oracle_horizontal_gradient(spec, h0, p, opts).squaredNorm();
    const double dev_a = relative_dev(g2, 16.0 * v2 * h);
    rep.gradient_dev = std::max(rep.gradient_dev, dev_a);
    rep.gradient_dev_squared = std::max(rep.gradient_dev_squared, relative_dev(g2, 16.0 * v2 * h * h));
    rep.gradient_dev_fourth = std::max(rep.gradient_dev_fourth, relative_dev(g2, 16.0 * v2 * std::pow(h, 4)));

    const Mat hess = oracle_horizontal_hessian(spec, h0, p, opts);
    std::vector<Vec> br;
    double bsum = 0.0;
    for (int j = 0; j < m1; ++j) {
      br.push_back(spec.bracket(v, Vec::Unit(m1, j)));
      bsum += br.back().squaredNorm();
    }
    double dev_b = 0.0;
    for (int i = 0; i < m1; ++i)
      for (int j = 0; j < m1; ++j) {
        const double closed = 8.0 * v[i] * v[j] + (i == j ? 4.0 * v2 : 0.0) + 8.0 * br[j].dot(br[i]);
        dev_b = std::max(dev_b, relative_dev(hess(i, j), closed));
      }
    rep.hessian_dev = std::max(rep.hessian_dev, dev_b);
    const double dev_c = relative_dev(bsum, spec.m2() * v2);
    rep.bracket_dev = std::max(rep.bracket_dev, dev_c);
    const double local = std::max({dev_a, dev_b, dev_c});
    if (local > worst) {
      worst = local;
      rep.worst = p;
    }
  }
  return rep;
}

std::vector<Point> random_points(const GroupSpec& spec, int n, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-radius, radius);
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    Vec v(spec.m1()), z(spec.m2());
    for (int a = 0; a < spec.m1(); ++a) v[a] = coord(rng);
    for (int k = 0; k < spec.m2(); ++k) z[k] = coord(rng);
    pts.push_back(make_point(spec, v, z));
  }
  return pts;
}

ModulusEstimate estimate_modulus(const GroupSpec& spec, const SmoothFunction& h, const SmoothFunction& h0,
                                 double eps, const std::vector<std::pair<Point, Point>>& pairs) {
  if (!(eps > 0.0)) throw std::invalid_argument("estimate_modulus: eps must be positive");
  ModulusEstimate est;
  double worst = 0.0;
  for (const auto& [x, xi] : pairs) {
    const double num = std::abs(h(x) - h(xi)) - eps;
    const double den = h0(product(spec, inverse(spec, xi), x));
    if (den < 1e-12) {
      if (num > 0.0 && est.feasible) {
        est.feasible = false;
        est.witness = std::make_pair(x, xi);
      }
      continue;
    }
    if (num > 0.0) worst = std::max(worst, num / den);
  }
  est.B = 1.1 * worst;
  return est;
}

double PerronSandwich::min_eps() const {
  double m = kInf;
  for (const auto& [e, b] : B_table) m = std::min(m, e);
  return m;
}

double PerronSandwich::f_at(std::size_t node, double t) const {
  const std::size_t nn = z.grid().size();
  double best = kInf;
  for (std::size_t e = 0; e < B_table.size(); ++e)
    best = std::min(best, B_table[e].first + B_table[e].second * C * t + inner[e * nn + node]);
  return best;
}

nlohmann::json to_json(const PerronSandwich& s) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [e, b] : s.B_table) table.push_back({e, b});
  nlohmann::json j{{"B_table", table}, {"C", s.C}, {"feasible", s.feasible}, {"min_eps", s.min_eps()}};
  if (s.witness) j["witness"] = {{"x_node", s.witness->first}, {"xi_node", s.witness->second}};
  return j;
}

PerronSandwich perron_sandwich(const GroupSpec& spec, const SmoothFunction& h, const BarrierSpec& barrier,
                               const Grid& grid, const std::vector<double>& times) {
  if (barrier.B_table.empty()) throw std::invalid_argument("perron_sandwich: empty B table");
  if (!(barrier.C > 0.0)) throw std::invalid_argument("perron_sandwich: curvature bound C must be positive");
  const std::size_t nn = grid.size(), ne = barrier.B_table.size();
  const std::vector<Point> pts = node_points(spec, grid);
  std::vector<double> hv(nn);
  for (std::size_t n = 0; n < nn; ++n) hv[n] = h(pts[n]);

  std::vector<double> inner(ne * nn, kInf);
  std::vector<std::size_t> bad(nn, nn);  // first violating xi per x
  parallel_for(nn, [&](std::size_t x) {
    const Point& px = pts[x];
    for (std::size_t xi = 0; xi < nn; ++xi) {
      const double b0 = barrier.h0(product(spec, inverse(spec, pts[xi]), px));
      const double diff = std::abs(hv[x] - hv[xi]);
      bool ok = true;  // the hypothesis must hold for every eps in the table
      for (std::size_t e = 0; e < ne; ++e) {
        const auto& [eps, B] = barrier.B_table[e];
        inner[e * nn + x] = std::min(inner[e * nn + x], hv[xi] + B * b0);
        if (diff > eps + B * b0 + 1e-12) ok = false;
      }
      if (!ok && bad[x] == nn) bad[x] = xi;
    }
  });

  PerronSandwich s{SpaceTimeField::sample(grid, times, [&](const Vec& c, double) { return h(from_coordinates(spec, c)); }),
                   SpaceTimeField(grid, times, std::vector<double>(nn * times.size(), 0.0)),
                   std::move(inner),
                   barrier.B_table,
                   barrier.C,
                   true,
                   std::nullopt};
  for (std::size_t x = 0; x < nn; ++x)
    if (bad[x] != nn) {
      s.feasible = false;
      s.witness = std::make_pair(x, bad[x]);
      break;
    }
  std::vector<double> fv(nn * times.size());
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t n = 0; n < nn; ++n) fv[k * nn + n] = s.f_at(n, times[k]);
  s.f = SpaceTimeField(grid, times, std::move(fv));
  return s;
}

std::size_t nearest_node(const Grid& grid, const Vec& coords) {
  std::vector<int> idx(static_cast<std::size_t>(grid.axes()));
  for (int a = 0; a < grid.axes(); ++a) {
    const long i = std::lround((coords[a] - grid.lower(a)) / grid.spacing(a));
    idx[static_cast<std::size_t>(a)] = static_cast<int>(std::clamp<long>(i, 0, grid.count(a) - 1));
  }
  return grid.node(idx);
}

}  // namespace carnotflow
