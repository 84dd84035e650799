#include "carnotflow/flow_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace carnotflow {

namespace {

// Snapshot and end times are hit exactly; steps this close to them snap.
constexpr double kTimeSnap = 1e-12;

double current_time(const ScalarField& u) { return u.time().value_or(0.0); }

double dt_from_spectrum(const FlowProblem& p, double max_pos_eig, double kappa, double t) {
  const int m1 = p.spec.m1();
  const double h = p.u0.grid().min_spacing();
  const double coeff = m1 * std::pow(max_pos_eig, m1 - 1) * kappa;
  const double dt = p.dt_safety * h * h / (coeff + kDtFloor);
  return std::min(dt, std::max(0.0, p.t_end - t));
}

ScalarField advance(const FlowProblem& p, const ScalarField& u, const ScalarField& rhs, double dt) {
  const Grid& g = u.grid();
  const double t_new = current_time(u) + dt;
  std::vector<double> next(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (g.is_interior(n))
      next[n] = u[n] + dt * rhs[n];
    else
      next[n] = p.boundary ? p.boundary(g.coords(n), t_new) : p.u0[n];
    if (!std::isfinite(next[n]))
      throw SolverAbort("non-finite value at node " + std::to_string(n) + " at t=" + std::to_string(t_new), n);
  }
  return ScalarField(g, std::move(next), t_new);
}

double sup_abs(const ScalarField& u) {
  double s = 0.0;
  for (double x : u.values()) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

void FlowProblem::validate() const {
  if (u0.grid().axes() != spec.dim()) throw std::invalid_argument("initial data grid does not match group dimension");
  for (double x : u0.values())
    if (!std::isfinite(x)) throw std::invalid_argument("initial data is not finite");
  if (!(t_end >= 0.0)) throw std::invalid_argument("T_end must be nonnegative");
  if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw std::invalid_argument("dt_safety must lie in (0, 1]");
  if (snapshot_every < 0) throw std::invalid_argument("snapshot_every must be nonnegative");
  if (snapshot_interval < 0.0) throw std::invalid_argument("snapshot_interval must be nonnegative");
}

double frame_row_bound(const GroupSpec& spec, const Grid& grid) {
  // Frame entries are linear in v, so the bound is attained at a box corner
  // in the v coordinates; scanning all nodes keeps this independent of that.
  double kappa = 0.0;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Mat a = frame(spec, grid.coords(n)).a;
    kappa = std::max(kappa, a.rowwise().squaredNorm().maxCoeff());
  }
  return kappa;
}

double stable_dt(const FlowProblem& problem, const ScalarField& u) {
  const FlowOperatorSample s = evaluate_flow_operator(problem.spec, u, problem.variant);
  return dt_from_spectrum(problem, s.max_pos_eig, frame_row_bound(problem.spec, u.grid()), current_time(u));
}

ScalarField step(const FlowProblem& problem, const ScalarField& u, double dt) {
  const FlowOperatorSample s = evaluate_flow_operator(problem.spec, u, problem.variant);
  return advance(problem, u, s.rhs, dt);
}

FlowTrace run(const FlowProblem& problem) {
  problem.validate();
  FlowTrace trace;
  ScalarField u = problem.u0;
  u.set_time(0.0);
  trace.snapshots.push_back(u);
  if (problem.t_end == 0.0) return trace;

  const double kappa = frame_row_bound(problem.spec, u.grid());
  double t = 0.0;
  int steps = 0;
  double next_snapshot = problem.snapshot_interval > 0.0 ? problem.snapshot_interval : problem.t_end;
  while (t < problem.t_end) {
    const FlowOperatorSample s = evaluate_flow_operator(problem.spec, u, problem.variant);
    double dt = dt_from_spectrum(problem, s.max_pos_eig, kappa, t);
    bool at_snapshot = false;
    if (problem.snapshot_interval > 0.0 && t + dt >= next_snapshot - kTimeSnap) {
      dt = next_snapshot - t;
      at_snapshot = true;
    }
    if (t + dt >= problem.t_end - kTimeSnap) dt = problem.t_end - t;

    u = advance(problem, u, s.rhs, dt);
    ++steps;
    t = (t + dt >= problem.t_end - kTimeSnap) ? problem.t_end : (at_snapshot ? next_snapshot : t + dt);
    u.set_time(t);
    trace.series.push_back({steps, t, dt, s.min_eig, s.max_abs_rhs, sup_abs(u)});

    if (at_snapshot) {
      while (next_snapshot <= t + kTimeSnap) next_snapshot += problem.snapshot_interval;
    }
    const bool final_step = t >= problem.t_end;
    const bool by_count = problem.snapshot_every > 0 && steps % problem.snapshot_every == 0;
    if (final_step || at_snapshot || by_count) trace.snapshots.push_back(u);
  }
  // The per-step series records the spectrum of the state a step started from;
  // append the spectrum of the final state so the monitored series covers t_end.
  const FlowOperatorSample last = evaluate_flow_operator(problem.spec, u, problem.variant);
  trace.series.push_back({steps, t, 0.0, last.min_eig, last.max_abs_rhs, sup_abs(u)});
  return trace;
}

nlohmann::json to_json(const OrderingReport& r) {
  nlohmann::json j{{"ordered", r.ordered}, {"max_violation", r.max_violation}, {"min_margin", r.min_margin}};
  if (!r.ordered)
    j["first_violation"] = {{"snapshot", r.snapshot}, {"node", r.node}, {"t", r.time},
                            {"value_a", r.value_a}, {"value_b", r.value_b}};
  return j;
}

OrderingReport compare_runs(const FlowTrace& a, const FlowTrace& b, double tol) {
  if (a.snapshots.size() != b.snapshots.size()) throw std::invalid_argument("traces have different snapshot counts");
  OrderingReport r{true, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
    const ScalarField& ua = a.snapshots[s];
    const ScalarField& ub = b.snapshots[s];
    if (!(ua.grid() == ub.grid())) throw std::invalid_argument("traces are on different grids");
    const double ta = current_time(ua), tb = current_time(ub);
    if (std::abs(ta - tb) > 1e-9 * std::max(1.0, std::abs(ta)))
      throw std::invalid_argument("snapshot times differ at index " + std::to_string(s));
    for (std::size_t n = 0; n < ua.values().size(); ++n) {
      const double diff = ua[n] - ub[n];
      r.max_violation = std::max(r.max_violation, diff);
      r.min_margin = std::min(r.min_margin, -diff);
      if (diff > tol && r.ordered) {
        r.ordered = false;
        r.snapshot = s;
        r.node = n;
        r.time = ta;
        r.value_a = ua[n];
        r.value_b = ub[n];
      }
    }
  }
  return r;
}

void write_trace(const FlowTrace& trace, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < trace.snapshots.size(); ++i) {
    char name[96];
    std::snprintf(name, sizeof name, "snap_%04zu_t%.6f.csv", i, current_time(trace.snapshots[i]));
    std::ofstream out(dir / name);
    write_csv(out, trace.snapshots[i]);
  }
  std::ofstream diag(dir / "diagnostics.csv");
  diag << "step,t,dt,min_eig,max_rhs,sup_u\n";
  char line[256];
  for (const auto& rec : trace.series) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", rec.step, rec.t, rec.dt, rec.min_eig,
                  rec.max_rhs, rec.sup_u);
    diag << line;
  }
}

}  // namespace carnotflow
