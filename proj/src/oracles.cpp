#include "carnotflow/oracles.hpp"

#include "carnotflow/field_calculus.hpp"
#include "carnotflow/graph_geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace carnotflow {

namespace {

Vec random_unit(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec u(n);
  do {
    for (int i = 0; i < n; ++i) u[i] = normal(rng);
  } while (u.norm() < 1e-8);
  return u.normalized();
}

}  // namespace

double ExactSolution::residual(const Vec& x, double t) const {
  const HorizontalJet j = horizontal_jet(spec, x, gradient(x, t), hessian(x, t));
  const double rhs = target == TargetEquation::graph ? graph_flow_rhs(j.gradient, j.hessian, FlowVariant::det_plus)
                                                     : levelset_flow_rhs(j.gradient, j.hessian);
  return time_derivative(x, t) - rhs;
}

nlohmann::json to_json(const OracleReport& r) {
  return {{"name", r.name}, {"max_residual", r.max_residual}, {"samples", r.samples}};
}

OracleReport residual_report(const ExactSolution& s, int n, double t0, double t1, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> time(t0, t1);
  OracleReport r{s.name, 0.0, 0};
  for (int i = 0; i < n; ++i) {
    const double t = time(rng);
    const Vec x = s.sample_point(rng, t);
    r.max_residual = std::max(r.max_residual, std::abs(s.residual(x, t)));
    ++r.samples;
  }
  return r;
}

void self_test(const ExactSolution& s) {
  const double t1 = std::isfinite(s.t_max) ? s.t_min + 0.9 * (s.t_max - s.t_min) : s.t_min + 10.0;
  const OracleReport r = residual_report(s, 1000, s.t_min, t1);
  if (!(r.max_residual <= 1e-9))
    throw std::logic_error(s.name + " fails its residual self-test: " + std::to_string(r.max_residual));
}

ExactSolution grim_reaper() {
  ExactSolution s;
  s.name = "grim_reaper";
  s.spec = make_euclidean(1);
  s.target = TargetEquation::graph;
  s.t_min = 0.0;
  s.t_max = std::numeric_limits<double>::infinity();
  s.in_domain = [](const Vec& x) { return std::abs(x[0]) < std::numbers::pi / 2; };
  auto check = [dom = s.in_domain](const Vec& x) {
    if (!dom(x)) throw std::domain_error("grim reaper evaluated outside |x| < pi/2");
  };
  s.value = [check](const Vec& x, double t) {
    check(x);
    return t - std::log(std::cos(x[0]));
  };
  s.time_derivative = [check](const Vec& x, double) {
    check(x);
    return 1.0;
  };
  s.gradient = [check](const Vec& x, double) {
    check(x);
    Vec g(1);
    g[0] = std::tan(x[0]);
    return g;
  };
  s.hessian = [check](const Vec& x, double) {
    check(x);
    const double c = std::cos(x[0]);
    Mat h(1, 1);
    h(0, 0) = 1.0 / (c * c);
    return h;
  };
  s.sample_point = [](std::mt19937_64& rng, double) {
    std::uniform_real_distribution<double> d(-1.5, 1.5);
    Vec x(1);
    x[0] = d(rng);
    return x;
  };
  self_test(s);
  return s;
}

double cylinder_extinction_time(int m1, double R0) { return std::pow(R0, m1) / m1; }

double cylinder_scale(int m1, double R0, double t) {
  if (t >= cylinder_extinction_time(m1, R0)) throw std::domain_error("cylinder evaluated at or past extinction");
  return std::pow(std::pow(R0, m1) - m1 * t, 1.0 / m1) / R0;
}

ExactSolution shrinking_cylinder(const GroupSpec& spec, double R0) {
  if (!(R0 > 0.0)) throw std::invalid_argument("cylinder radius must be positive");
  const int m1 = spec.m1();
  const int dim = spec.dim();
  ExactSolution s;
  s.name = "shrinking_cylinder";
  s.spec = spec;
  s.target = TargetEquation::levelset;
  s.t_min = 0.0;
  s.t_max = cylinder_extinction_time(m1, R0);
  // base(t) = R0^m1 - m1 t
  auto base = [m1, R0, tmax = s.t_max](double t) {
    if (t >= tmax) throw std::domain_error("cylinder evaluated at or past extinction");
    return std::pow(R0, m1) - m1 * t;
  };
  s.in_domain = [](const Vec&) { return true; };
  s.value = [base, m1](const Vec& x, double t) {
    return x.head(m1).squaredNorm() - std::pow(base(t), 2.0 / m1);
  };
  s.time_derivative = [base, m1](const Vec&, double t) { return 2.0 * std::pow(base(t), 2.0 / m1 - 1.0); };
  s.gradient = [m1, dim](const Vec& x, double) {
    Vec g = Vec::Zero(dim);
    g.head(m1) = 2.0 * x.head(m1);
    return g;
  };
  s.hessian = [m1, dim](const Vec&, double) {
    Mat h = Mat::Zero(dim, dim);
    h.topLeftCorner(m1, m1) = 2.0 * Mat::Identity(m1, m1);
    return h;
  };
  s.sample_point = [base, m1, dim](std::mt19937_64& rng, double t) {
    std::uniform_real_distribution<double> zc(-1.0, 1.0);
    Vec x(dim);
    x.head(m1) = std::pow(base(t), 1.0 / m1) * random_unit(m1, rng);
    for (int k = m1; k < dim; ++k) x[k] = zc(rng);
    return x;
  };
  self_test(s);
  return s;
}

nlohmann::json to_json(const SelfSimilarityReport& r) {
  return {{"lambda", r.lambda}, {"max_abs_u", r.max_abs_u}, {"samples", r.samples}, {"passes", r.passes}};
}

SelfSimilarityReport self_similarity_check(const GroupSpec& spec, double R0, double t,
                                           const std::vector<Point>& on_m0) {
  const ExactSolution cyl = shrinking_cylinder(spec, R0);
  SelfSimilarityReport r;
  r.lambda = cylinder_scale(spec.m1(), R0, t);
  for (const Point& p : on_m0) {
    const Vec x = to_coordinates(dilate(spec, r.lambda, p));
    r.max_abs_u = std::max(r.max_abs_u, std::abs(cyl.value(x, t)));
    ++r.samples;
  }
  r.passes = r.max_abs_u <= 1e-10;
  return r;
}

std::vector<Point> cylinder_points(const GroupSpec& spec, double R0, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> zc(-1.0, 1.0);
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) {
    Vec z(spec.m2());
    const Vec v = R0 * random_unit(spec.m1(), rng);
    for (int k = 0; k < spec.m2(); ++k) z[k] = zc(rng);
    pts.push_back(make_point(spec, v, z));
  }
  return pts;
}

}  // namespace carnotflow
