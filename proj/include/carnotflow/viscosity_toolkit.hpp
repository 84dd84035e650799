#pragma once

// Executable versions of the comparison-principle ingredients: residual
// signs of sampled space-time fields, gauge sup/inf convolutions,
// strictification, parabolic rescaling, the H-type barrier and the Perron
// sub/supersolution pair built from it.

#include "carnotflow/field_calculus.hpp"
#include "carnotflow/flow_solver.hpp"
#include "carnotflow/graph_geometry.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace carnotflow {

/// Values on a grid at a strictly increasing list of times, stored time-major.
class SpaceTimeField {
 public:
  SpaceTimeField(Grid grid, std::vector<double> times, std::vector<double> values);

  static SpaceTimeField sample(const Grid& grid, const std::vector<double>& times,
                               const std::function<double(const Vec&, double)>& fn);
  static SpaceTimeField from_trace(const FlowTrace& trace);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t time_count() const { return times_.size(); }
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t node, std::size_t k) const { return values_[k * grid_.size() + node]; }
  double& value(std::size_t node, std::size_t k) { return values_[k * grid_.size() + node]; }
  ScalarField slice(std::size_t k) const;
  /// Linear in t between samples. Throws std::out_of_range outside the time span.
  double at_time(std::size_t node, double t) const;

 private:
  Grid grid_;
  std::vector<double> times_;
  std::vector<double> values_;
};

enum class ResidualClass { solution, sub, super, neither, excluded };

std::string to_string(ResidualClass c);

struct ResidualReport {
  std::vector<double> residual;       // u_t - rhs, NaN where excluded; time-major
  std::vector<ResidualClass> classes;  // time-major
  double max_residual;
  double min_residual;
  std::size_t counts[5];

  std::size_t count(ResidualClass c) const { return counts[static_cast<int>(c)]; }
  /// Every non-excluded sample satisfies r <= tol.
  bool all_sub() const { return count(ResidualClass::super) == 0 && count(ResidualClass::neither) == 0; }
  bool all_super() const { return count(ResidualClass::sub) == 0 && count(ResidualClass::neither) == 0; }
  bool all_solution() const { return all_sub() && all_super(); }
};

/// r = u_t - graph rhs at interior nodes; u_t by second-order differences in t
/// (one-sided at the first and last sample). solution if |r| <= tol, else sub
/// if r < 0, else super. Needs at least three time samples.
ResidualReport residual_classify(const GroupSpec& spec, const SpaceTimeField& u, FlowVariant variant,
                                 double tol);

/// w^eps(x, t) = max over samples (y, s) of w(y, s) - (|y^{-1} x|_g^{2r!} + |t - s|^2) / (2 eps).
SpaceTimeField sup_convolution(const GroupSpec& spec, const SpaceTimeField& w, double eps);
/// v_eps(x, t) = min over samples of v(y, s) + (|y^{-1} x|_g^{2r!} + |t - s|^2) / (2 eps).
SpaceTimeField inf_convolution(const GroupSpec& spec, const SpaceTimeField& v, double eps);

/// w - eps / (T - t). Throws std::invalid_argument when some sample has t >= T.
SpaceTimeField strictify(const SpaceTimeField& w, double eps, double T);
/// d/dt of the strictification term, eps / (T - t)^2.
double strictify_margin(double eps, double T, double t);

/// theta mu^{-(m1-1)} <= 1 with mu, theta in (0, 1].
bool scaling_admissible(int m1, double mu, double theta);
/// mu u(x, theta t) on the same grid and times. Throws std::invalid_argument
/// when the pair is not admissible or theta t_0 falls before the first sample.
SpaceTimeField scale_subsolution(const SpaceTimeField& u, int m1, double mu, double theta);

/// h_0 = |v|^4 + 16 |z|^2. Throws std::invalid_argument for non H-type groups.
SmoothFunction htype_barrier(const GroupSpec& spec);

struct BarrierSpec {
  SmoothFunction h0;
  double eps0 = 1.0;
  double C = 0.0;  // curvature bound; 0 means not yet known
  std::vector<std::pair<double, double>> B_table;  // (eps, B_eps)
};

struct BarrierReport {
  double max_ratio = 0.0;
  Point witness;  // where max_ratio is attained
  bool lower_bound_holds = true;
  std::optional<Point> lower_bound_witness;
  bool smooth = true;  // oracle consistent under step refinement
  std::optional<Point> smoothness_witness;
  bool curvature_bound_holds = true;  // max_ratio <= C, vacuous when C == 0
  double suggested_C = 0.0;           // 1.1 max_ratio
  std::vector<std::pair<double, double>> B_table;

  bool feasible() const { return lower_bound_holds && smooth && curvature_bound_holds; }
};

nlohmann::json to_json(const BarrierReport& r);

/// det_+ (D_0^2 h0)^* / (1 + |D_0 h0|^2)^{(m1+1)/2} through the derivative oracle.
double barrier_ratio(const GroupSpec& spec, const SmoothFunction& h0, const Point& p,
                     const OracleOptions& opts = {});

/// Samples n points with gauge norm up to radius (log-uniform in the radius)
/// and checks h0 >= eps0 |x|_g^{2r!}, the curvature ratio bound and the
/// smoothness of h0. The largest ratios are refined by a local search.
BarrierReport barrier_validate(const GroupSpec& spec, const BarrierSpec& barrier, double radius, int n,
                               std::uint64_t seed = 1);

struct IdentityReport {
  double gradient_dev = 0.0;  // |D_0 h0|^2 = 16 |v|^2 h0
  double hessian_dev = 0.0;   // closed-form symmetrized Hessian
  double bracket_dev = 0.0;   // sum_j |[v, e_j]|^2 = m2 |v|^2
  // the same gradient identity with h0 squared and to the fourth power
  double gradient_dev_squared = 0.0;
  double gradient_dev_fourth = 0.0;
  std::size_t samples = 0;
  Point worst;  // sample with the largest deviation among the three identities

  double max_dev() const;
};

nlohmann::json to_json(const IdentityReport& r);

/// Deviations are |a - b| / (1 + |b|), maximized over the samples.
IdentityReport htype_identities_check(const GroupSpec& spec, const std::vector<Point>& samples,
                                      const OracleOptions& opts = {});

/// n points with v and z uniform in [-radius, radius].
std::vector<Point> random_points(const GroupSpec& spec, int n, double radius, std::uint64_t seed);

struct ModulusEstimate {
  double B = 0.0;  // 1.1 times the largest sampled ratio
  bool feasible = true;
  std::optional<std::pair<Point, Point>> witness;  // (x, xi) with h0 ~ 0 and |h(x) - h(xi)| > eps
};

/// Smallest B with |h(x) - h(xi)| <= eps + B h0(xi^{-1} x) on the pairs, times 1.1.
ModulusEstimate estimate_modulus(const GroupSpec& spec, const SmoothFunction& h, const SmoothFunction& h0,
                                 double eps, const std::vector<std::pair<Point, Point>>& pairs);

struct PerronSandwich {
  SpaceTimeField z;  // h(x), constant in t
  SpaceTimeField f;  // min over table eps and grid xi of h(xi) + eps + B_eps (h0(xi^{-1} x) + C t)
  std::vector<double> inner;  // per (eps index, node): min over xi of h(xi) + B_eps h0(xi^{-1} x)
  std::vector<std::pair<double, double>> B_table;
  double C = 0.0;
  bool feasible = true;  // modulus condition on all grid pairs
  std::optional<std::pair<std::size_t, std::size_t>> witness;  // (x node, xi node)

  double min_eps() const;
  /// f at a node and any time.
  double f_at(std::size_t node, double t) const;
};

nlohmann::json to_json(const PerronSandwich& s);

PerronSandwich perron_sandwich(const GroupSpec& spec, const SmoothFunction& h, const BarrierSpec& barrier,
                               const Grid& grid, const std::vector<double>& times);

/// Node whose coordinates are closest to coords.
std::size_t nearest_node(const Grid& grid, const Vec& coords);

}  // namespace carnotflow
