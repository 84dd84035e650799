#include "carnotflow/graph_geometry.hpp"

#include "carnotflow/parallel.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace carnotflow {

std::string to_string(FlowVariant v) { return v == FlowVariant::det ? "det" : "det_plus"; }

FlowVariant flow_variant_from_string(const std::string& name) {
  if (name == "det") return FlowVariant::det;
  if (name == "det_plus" || name == "det+") return FlowVariant::det_plus;
  throw std::invalid_argument("unknown flow variant '" + name + "'");
}

std::string to_string(ConvexityClass c) {
  switch (c) {
    case ConvexityClass::strictly_weakly_H_convex: return "strictly_weakly_H_convex";
    case ConvexityClass::weakly_H_convex: return "weakly_H_convex";
    case ConvexityClass::not_H_convex: return "not_H_convex";
  }
  return "unknown";
}

Vec horizontal_normal(const Vec& d0u) {
  const double norm = std::sqrt(1.0 + d0u.squaredNorm());
  Vec nu(d0u.size() + 1);
  nu.head(d0u.size()) = d0u / norm;
  nu[d0u.size()] = -1.0 / norm;
  return nu;
}

double graph_gauss_curvature(const Vec& d0u, const Mat& h) {
  const auto m1 = static_cast<double>(h.rows());
  return h.determinant() / std::pow(1.0 + d0u.squaredNorm(), 0.5 * (m1 + 2.0));
}

double graph_flow_rhs(const Vec& d0u, const Mat& h, FlowVariant variant) {
  const auto m1 = static_cast<double>(h.rows());
  const double num = variant == FlowVariant::det ? h.determinant() : det_plus(h);
  return num / std::pow(1.0 + d0u.squaredNorm(), 0.5 * (m1 + 1.0));
}

double levelset_flow_rhs(const Vec& d0u, const Mat& h, double char_tol) {
  if (char_tol < 0.0) char_tol = 1e-8 * (1.0 + d0u.cwiseAbs().maxCoeff());
  const double g = d0u.norm();
  if (g < char_tol) throw CharacteristicPointError("characteristic point: |D_0 u| below tolerance");
  const auto m1 = d0u.size();
  const Vec nu = d0u / g;
  const Mat nn = nu * nu.transpose();
  const Mat proj = Mat::Identity(m1, m1) - nn;
  const Mat restricted = proj * h * proj / g + nn;
  return g * restricted.determinant();
}

nlohmann::json to_json(const ConvexityReport& r) {
  return {{"min_eig", r.min_eig}, {"class", to_string(r.classification)}, {"node_index", r.node}};
}

ConvexityReport classify_convexity(const GroupSpec& spec, const ScalarField& u, double margin) {
  if (margin < 0.0) throw std::invalid_argument("margin must be nonnegative");
  const Grid& g = u.grid();
  std::vector<double> eig(g.size(), std::numeric_limits<double>::infinity());
  parallel_for(g.size(), [&](std::size_t n) {
    if (!g.is_interior(n)) return;
    const EuclideanJet e = euclidean_jet(u, n);
    eig[n] = min_eigenvalue(horizontal_jet(spec, g.coords(n), e.gradient, e.hessian).hessian);
  });
  ConvexityReport r{std::numeric_limits<double>::infinity(), ConvexityClass::strictly_weakly_H_convex, 0, Vec()};
  for (std::size_t n = 0; n < g.size(); ++n)
    if (eig[n] < r.min_eig) {
      r.min_eig = eig[n];
      r.node = n;
    }
  r.location = g.coords(r.node);
  if (r.min_eig > margin)
    r.classification = ConvexityClass::strictly_weakly_H_convex;
  else if (r.min_eig >= -margin)
    r.classification = ConvexityClass::weakly_H_convex;
  else
    r.classification = ConvexityClass::not_H_convex;
  return r;
}

FlowOperatorSample evaluate_flow_operator(const GroupSpec& spec, const ScalarField& u, FlowVariant variant) {
  const Grid& g = u.grid();
  if (g.axes() != spec.dim()) throw std::invalid_argument("grid is not compatible with group");
  std::vector<double> rhs(g.size(), 0.0);
  std::vector<double> lo(g.size(), std::numeric_limits<double>::infinity());
  std::vector<double> hi(g.size(), 0.0);
  parallel_for(g.size(), [&](std::size_t n) {
    if (!g.is_interior(n)) return;
    const EuclideanJet e = euclidean_jet(u, n);
    const HorizontalJet h = horizontal_jet(spec, g.coords(n), e.gradient, e.hessian);
    const Vec eig = symmetric_eigenvalues(h.hessian);
    lo[n] = eig[0];
    hi[n] = std::max(0.0, eig[eig.size() - 1]);
    const double denom = std::pow(1.0 + h.gradient.squaredNorm(), 0.5 * (spec.m1() + 1.0));
    double num;
    if (variant == FlowVariant::det) {
      num = h.hessian.determinant();
    } else {
      // Same clamp as det_plus, reusing the eigenvalues.
      const double floor = 1e-12 * h.hessian.norm();
      num = 1.0;
      for (Eigen::Index i = 0; i < eig.size(); ++i) num *= eig[i] <= floor ? 0.0 : eig[i];
    }
    rhs[n] = num / denom;
  });
  FlowOperatorSample s{ScalarField(g, std::move(rhs), u.time()), std::numeric_limits<double>::infinity(), 0.0, 0.0, 0};
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (lo[n] < s.min_eig) {
      s.min_eig = lo[n];
      s.min_eig_node = n;
    }
    s.max_pos_eig = std::max(s.max_pos_eig, hi[n]);
    s.max_abs_rhs = std::max(s.max_abs_rhs, std::abs(s.rhs[n]));
  }
  return s;
}

ScalarField graph_flow_rhs_field(const GroupSpec& spec, const ScalarField& u, FlowVariant variant) {
  const Grid& g = u.grid();
  std::vector<double> rhs(g.size());
  parallel_for(g.size(), [&](std::size_t n) {
    const EuclideanJet e = euclidean_jet(u, n);
    const HorizontalJet h = horizontal_jet(spec, g.coords(n), e.gradient, e.hessian);
    rhs[n] = graph_flow_rhs(h.gradient, h.hessian, variant);
  });
  return ScalarField(g, std::move(rhs), u.time());
}

HypothesisResidual convexity_hypothesis_residual(const GroupSpec& spec, const ScalarField& u0,
                                                 double singular_tol) {
  const Grid& g = u0.grid();
  const ScalarField G = graph_flow_rhs_field(spec, u0, FlowVariant::det_plus);
  const double m1 = spec.m1();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  HypothesisResidual out{ScalarField(g, std::vector<double>(g.size(), nan), u0.time()), {},
                         std::numeric_limits<double>::infinity(), true};
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!g.is_interior(n)) continue;
    const Vec x = g.coords(n);
    const EuclideanJet eu = euclidean_jet(u0, n);
    const HorizontalJet hu = horizontal_jet(spec, x, eu.gradient, eu.hessian);
    const double lam = min_eigenvalue(hu.hessian);
    if (lam < -singular_tol)
      throw std::domain_error("initial data is not weakly H-convex at node " + std::to_string(n));
    if (lam <= singular_tol) {
      out.excluded.push_back(n);
      continue;
    }
    const EuclideanJet eg = euclidean_jet(G, n);
    const HorizontalJet hg = horizontal_jet(spec, x, eg.gradient, eg.hessian);
    const double gn = G[n];
    const double drift = -(m1 + 1.0) / (1.0 + hu.gradient.squaredNorm()) * gn * hu.gradient.dot(hg.gradient);
    const double diffusion = gn * (hu.hessian.inverse() * hg.hessian).trace();
    out.residual[n] = drift + diffusion;
    out.min_value = std::min(out.min_value, out.residual[n]);
  }
  out.holds = out.min_value >= 0.0;
  return out;
}

}  // namespace carnotflow
