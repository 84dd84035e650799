#pragma once

// Forward Euler time stepping of the horizontal Gauss curvature flow of a
// graph, u_t = det(_+)((D_0^2 u)^*) / (1 + |D_0 u|^2)^{(m1+1)/2}, on a box
// with Dirichlet data.

#include "carnotflow/field_calculus.hpp"
#include "carnotflow/graph_geometry.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace carnotflow {

/// g(x, t) on the boundary, x in flattened exponential coordinates.
using BoundaryData = std::function<double(const Vec&, double)>;

struct FlowProblem {
  GroupSpec spec;
  ScalarField u0;
  BoundaryData boundary;  // empty: boundary frozen at u0
  FlowVariant variant = FlowVariant::det_plus;
  double t_end = 0.0;
  double dt_safety = 0.4;
  int snapshot_every = 0;          // steps between snapshots, 0 for none
  double snapshot_interval = 0.0;  // if > 0, steps are shortened to land on multiples of it

  /// Throws std::invalid_argument on a malformed problem.
  void validate() const;
};

struct StepRecord {
  int step;
  double t;
  double dt;
  double min_eig;
  double max_rhs;
  double sup_u;
};

struct FlowTrace {
  std::vector<ScalarField> snapshots;  // each carries its time stamp
  std::vector<StepRecord> series;

  const ScalarField& final_state() const { return snapshots.back(); }
};

class SolverAbort : public std::runtime_error {
 public:
  SolverAbort(const std::string& what, std::size_t node) : std::runtime_error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

inline constexpr double kDtFloor = 1e-12;

/// Largest frame row norm squared over the grid.
double frame_row_bound(const GroupSpec& spec, const Grid& grid);

/// dt_safety h_min^2 / (m1 Lambda^{m1-1} kappa + 1e-12), capped at t_end - t,
/// where Lambda is the largest positive eigenvalue of (D_0^2 u)^* and kappa
/// the frame row bound.
double stable_dt(const FlowProblem& problem, const ScalarField& u);

/// One forward Euler step; boundary nodes take g(x, t + dt). Throws
/// SolverAbort when a non-finite value appears.
ScalarField step(const FlowProblem& problem, const ScalarField& u, double dt);

/// Integrates to t_end. The first snapshot is u0, the last is at t_end.
FlowTrace run(const FlowProblem& problem);

struct OrderingReport {
  bool ordered;
  double max_violation;  // max of u_A - u_B over all snapshot nodes
  double min_margin;     // min of u_B - u_A
  // first violation, when not ordered
  std::size_t snapshot = 0;
  std::size_t node = 0;
  double time = 0.0;
  double value_a = 0.0;
  double value_b = 0.0;
};

nlohmann::json to_json(const OrderingReport& r);

/// Checks u_A <= u_B + tol at every snapshot node. Throws
/// std::invalid_argument when grids or snapshot times differ.
OrderingReport compare_runs(const FlowTrace& a, const FlowTrace& b, double tol);

/// Writes snap_<index>_t<time>.csv for each snapshot and diagnostics.csv.
void write_trace(const FlowTrace& trace, const std::filesystem::path& dir);

}  // namespace carnotflow
