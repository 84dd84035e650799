#pragma once

// Closed-form solutions with hand-differentiated derivatives, used as
// ground truth for the stencil operators and the time stepper.

#include "carnotflow/group_algebra.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace carnotflow {

enum class TargetEquation { graph, levelset };

struct ExactSolution {
  std::string name;
  GroupSpec spec;
  TargetEquation target = TargetEquation::graph;
  double t_min = 0.0;
  double t_max = 0.0;  // exclusive; +inf when unbounded

  // Closures take flattened coordinates (v, z). Derivatives are Euclidean.
  std::function<double(const Vec&, double)> value;
  std::function<double(const Vec&, double)> time_derivative;
  std::function<Vec(const Vec&, double)> gradient;
  std::function<Mat(const Vec&, double)> hessian;
  std::function<bool(const Vec&)> in_domain;
  /// A point in the domain where the residual is meaningful at time t
  /// (on the zero level set for level-set solutions).
  std::function<Vec(std::mt19937_64&, double)> sample_point;

  /// u_t minus the right-hand side of the target equation, from the
  /// analytic derivatives (det_+ variant for graphs).
  double residual(const Vec& x, double t) const;
};

struct OracleReport {
  std::string name;
  double max_residual = 0.0;
  std::size_t samples = 0;
};

nlohmann::json to_json(const OracleReport& r);

/// Residual at n sampled (x, t) with t uniform on [t0, t1).
OracleReport residual_report(const ExactSolution& s, int n, double t0, double t1, std::uint64_t seed = 7);

/// u = t - ln cos x on |x| < pi/2, the translating solution of the
/// one-dimensional graph flow u_t = u_xx / (1 + u_x^2). Evaluating outside
/// the domain throws std::domain_error.
ExactSolution grim_reaper();

/// u = |v|^2 - (R0^m1 - m1 t)^{2/m1}, whose zero set is a cylinder over a
/// sphere in the first layer shrinking by dilations. Level-set target;
/// times at or beyond the extinction time R0^m1 / m1 throw std::domain_error.
ExactSolution shrinking_cylinder(const GroupSpec& spec, double R0);

double cylinder_extinction_time(int m1, double R0);
/// (R0^m1 - m1 t)^{1/m1} / R0.
double cylinder_scale(int m1, double R0, double t);

/// Both constructors run this on 1000 samples and throw std::logic_error
/// when the residual exceeds 1e-9.
void self_test(const ExactSolution& s);

struct SelfSimilarityReport {
  double lambda = 1.0;
  double max_abs_u = 0.0;  // |u(delta_lambda p, t)| over the samples
  std::size_t samples = 0;
  bool passes = true;  // max_abs_u <= 1e-10
};

nlohmann::json to_json(const SelfSimilarityReport& r);

/// Maps zeros of u(., 0) by delta_lambda(t) and evaluates u(., t) there.
SelfSimilarityReport self_similarity_check(const GroupSpec& spec, double R0, double t,
                                           const std::vector<Point>& on_m0);

/// n points on the initial cylinder |v| = R0, z uniform in [-1, 1].
std::vector<Point> cylinder_points(const GroupSpec& spec, double R0, int n, std::uint64_t seed = 11);

}  // namespace carnotflow
