#pragma once

// Geometry of graphs s = u(x) in G x R and of level sets {u = 0} in G,
// expressed through D_0 u and the symmetrized horizontal Hessian.

#include "carnotflow/field_calculus.hpp"
#include "carnotflow/group_algebra.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace carnotflow {

enum class FlowVariant { det, det_plus };

std::string to_string(FlowVariant v);
FlowVariant flow_variant_from_string(const std::string& name);

/// (D_0 u, -1) / sqrt(1 + |D_0 u|^2).
Vec horizontal_normal(const Vec& d0u);

/// det(H) / (1 + |D_0 u|^2)^{(m1+2)/2}; signed.
double graph_gauss_curvature(const Vec& d0u, const Mat& h);

/// det(H) or det_+(H) over (1 + |D_0 u|^2)^{(m1+1)/2}.
double graph_flow_rhs(const Vec& d0u, const Mat& h, FlowVariant variant);

class CharacteristicPointError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// |D_0 u| det((I - nu nu^T) H (I - nu nu^T) / |D_0 u| + nu nu^T), nu = D_0 u / |D_0 u|.
/// char_tol < 0 selects the default 1e-8 (1 + |D_0 u|_inf). Throws
/// CharacteristicPointError when |D_0 u| < char_tol.
double levelset_flow_rhs(const Vec& d0u, const Mat& h, double char_tol = -1.0);

enum class ConvexityClass { strictly_weakly_H_convex, weakly_H_convex, not_H_convex };

std::string to_string(ConvexityClass c);

struct ConvexityReport {
  double min_eig;
  ConvexityClass classification;
  std::size_t node;
  Vec location;
};

nlohmann::json to_json(const ConvexityReport& r);

/// Minimum over interior nodes of the smallest eigenvalue of (D_0^2 u)^*.
/// Strict if min > margin, weak if min >= -margin, otherwise not convex.
ConvexityReport classify_convexity(const GroupSpec& spec, const ScalarField& u, double margin);

/// Flow right-hand side at interior nodes plus the spectral extremes the
/// time stepper needs. Boundary entries of rhs are zero.
struct FlowOperatorSample {
  ScalarField rhs;
  double min_eig;        // over interior nodes
  double max_pos_eig;    // largest positive eigenvalue over interior nodes, 0 if none
  double max_abs_rhs;
  std::size_t min_eig_node;
};

FlowOperatorSample evaluate_flow_operator(const GroupSpec& spec, const ScalarField& u, FlowVariant variant);

/// Graph right-hand side at every node (one-sided stencils on the boundary).
ScalarField graph_flow_rhs_field(const GroupSpec& spec, const ScalarField& u, FlowVariant variant);

/// Initial-time value of u_tt for the det_+ graph flow,
///
///   -(m1+1)/(1+|D_0 u0|^2) G <D_0 u0, D_0 G> + G tr(((D_0^2 u0)^*)^{-1} (D_0^2 G)^*)
///
/// with G = det_+((D_0^2 u0)^*) / (1+|D_0 u0|^2)^{(m1+1)/2}. Convexity is
/// preserved on unbounded domains when this is nonnegative everywhere.
struct HypothesisResidual {
  ScalarField residual;              // NaN at boundary and excluded nodes
  std::vector<std::size_t> excluded;  // interior nodes with singular Hessian
  double min_value;
  bool holds;
};

/// Throws std::domain_error when u0 is not weakly H-convex at some interior
/// node; nodes where the Hessian is singular (smallest eigenvalue within
/// singular_tol of zero) are excluded and reported.
HypothesisResidual convexity_hypothesis_residual(const GroupSpec& spec, const ScalarField& u0,
                                                 double singular_tol = 1e-10);

}  // namespace carnotflow
