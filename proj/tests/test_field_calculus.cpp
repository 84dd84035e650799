#include "carnotflow/field_calculus.hpp"

#include "doctest.h"

#include <Eigen/LU>
#include <cmath>
#include <random>
#include <sstream>

using namespace carnotflow;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Grid heis_grid(int n) { return Grid::for_group(make_heisenberg(1), {-1, -1, -1}, {1, 1, 1}, {n, n, n}); }

}  // namespace

TEST_CASE("grid layout") {
  const Grid g({0, -1}, {1, 1}, {3, 5});
  CHECK(g.size() == 15);
  CHECK(g.spacing(0) == 0.5);
  CHECK(g.spacing(1) == 0.5);
  CHECK(g.stride(1) == 1);
  CHECK(g.stride(0) == 5);
  const std::size_t n = g.node({1, 3});
  CHECK(n == 8);
  CHECK(g.index(n, 0) == 1);
  CHECK(g.index(n, 1) == 3);
  CHECK(g.coords(n)[0] == 0.5);
  CHECK(g.coords(n)[1] == 0.5);
  CHECK(g.is_interior(n));
  CHECK_FALSE(g.is_interior(g.node({0, 2})));
  CHECK_FALSE(g.is_interior(g.node({1, 4})));
  CHECK_THROWS_AS(Grid({0}, {1}, {2}), std::invalid_argument);
  CHECK_THROWS_AS(Grid({1}, {0}, {4}), std::invalid_argument);
  CHECK(heis_grid(5).names() == std::vector<std::string>{"v1", "v2", "z1"});
}

TEST_CASE("Euclidean jet is exact on quadratics, including boundary nodes") {
  const Grid g({-1, 0, 2}, {1, 2, 3}, {5, 4, 6});
  auto f = [](const Vec& x) { return 1 + 2 * x[0] - x[1] + 3 * x[0] * x[1] + 0.5 * x[2] * x[2] - x[0] * x[2]; };
  const ScalarField u = ScalarField::sample(g, f);
  double worst = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec x = g.coords(n);
    const EuclideanJet j = euclidean_jet(u, n);
    Vec grad(3);
    grad << 2 + 3 * x[1] - x[2], -1 + 3 * x[0], x[2] - x[0];
    Mat hess(3, 3);
    hess << 0, 3, -1, 3, 0, 0, -1, 0, 1;
    worst = std::max({worst, (j.gradient - grad).cwiseAbs().maxCoeff(), (j.hessian - hess).cwiseAbs().maxCoeff()});
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("horizontal derivatives on Heisenberg") {
  const GroupSpec h = make_heisenberg(1);
  const Grid g = heis_grid(9);
  SUBCASE("paraboloid |v|^2") {
    const ScalarField u = ScalarField::sample(g, [](const Vec& x) { return x[0] * x[0] + x[1] * x[1]; });
    const VectorField d0 = horizontal_gradient(h, u);
    const SymMatrixField d2 = horizontal_hessian(h, u);
    for (std::size_t n = 0; n < g.size(); ++n) {
      const Vec x = g.coords(n);
      CHECK((d0.at(n) - 2 * x.head(2)).norm() < 1e-10);
      CHECK((d2.at(n) - 2 * Mat::Identity(2, 2)).norm() < 1e-10);
    }
  }
  SUBCASE("the z coordinate: X1 z = v2/2, X2 z = -v1/2, symmetric Hessian zero") {
    const ScalarField u = ScalarField::sample(g, [](const Vec& x) { return x[2]; });
    const VectorField d0 = horizontal_gradient(h, u);
    const SymMatrixField d2 = horizontal_hessian(h, u);
    const VectorField d1 = second_layer_gradient(h, u);
    for (std::size_t n = 0; n < g.size(); ++n) {
      const Vec x = g.coords(n);
      CHECK(d0.at(n)[0] == doctest::Approx(0.5 * x[1]));
      CHECK(d0.at(n)[1] == doctest::Approx(-0.5 * x[0]));
      CHECK(d2.at(n).norm() < 1e-10);
      CHECK(d1.at(n)[0] == doctest::Approx(1.0));
    }
  }
  SUBCASE("barrier Hessian is 12 |v|^2 I up to discretization") {
    const ScalarField u = ScalarField::sample(g, [](const Vec& x) {
      const double v2 = x[0] * x[0] + x[1] * x[1];
      return v2 * v2 + 16 * x[2] * x[2];
    });
    const SymMatrixField d2 = horizontal_hessian(h, u);
    double worst = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) {
      if (!g.is_interior(n)) continue;
      const Vec x = g.coords(n);
      worst = std::max(worst, (d2.at(n) - 12 * x.head(2).squaredNorm() * Mat::Identity(2, 2)).norm());
    }
    // fourth derivatives of |v|^4 are bounded by 24; h^2/12 * 24 * 2 axes
    CHECK(worst < 4 * 0.25 * 0.25);
  }
  CHECK_THROWS_AS(second_layer_gradient(make_euclidean(2), ScalarField::sample(Grid({0, 0}, {1, 1}, {3, 3}),
                                                                               [](const Vec&) { return 0.0; })),
                  std::invalid_argument);
}

TEST_CASE("symmetric eigenvalues, det_plus, min_eigenvalue") {
  Mat m(3, 3);
  m << 2, 0, 0, 0, -1, 0, 0, 0, 3;
  const Vec e = symmetric_eigenvalues(m);
  CHECK(e[0] == doctest::Approx(-1));
  CHECK(e[1] == doctest::Approx(2));
  CHECK(e[2] == doctest::Approx(3));
  CHECK(det_plus(m) == 0.0);
  CHECK(min_eigenvalue(m) == doctest::Approx(-1));
  Mat p(2, 2);
  p << 2, 1, 1, 2;
  CHECK(det_plus(p) == doctest::Approx(3));
  Mat z = Mat::Zero(2, 2);
  CHECK(det_plus(z) == 0.0);
  Mat one(1, 1);
  one << 5;
  CHECK(det_plus(one) == 5.0);
  Mat ns(2, 2);
  ns << 1, 2, 0, 1;
  CHECK_THROWS_AS(symmetric_eigenvalues(ns), std::invalid_argument);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    Mat a(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = nd(rng);
    const Mat s = a + a.transpose();
    const Vec ev = symmetric_eigenvalues(s);
    CHECK(ev.sum() == doctest::Approx(s.trace()).epsilon(1e-10));
    CHECK(ev.prod() == doctest::Approx(s.determinant()).epsilon(1e-9));
    for (int i = 1; i < 4; ++i) CHECK(ev[i - 1] <= ev[i]);
  }
}

TEST_CASE("derivative oracle") {
  const GroupSpec h = make_heisenberg(1);
  const Point p = make_point(h, vec({0.4, -0.3}), vec({0.7}));
  const SmoothFunction z = [](const Point& q) { return q.z[0]; };
  CHECK(oracle_first(h, z, p, 0).value == doctest::Approx(-0.15));
  CHECK(oracle_first(h, z, p, 1).value == doctest::Approx(-0.2));
  // X1 X2 z = -1/2, X2 X1 z = 1/2, so [X1, X2] = -d_z
  CHECK(oracle_second(h, z, p, 0, 1).value == doctest::Approx(-0.5));
  CHECK(oracle_second(h, z, p, 1, 0).value == doctest::Approx(0.5));
  CHECK(oracle_horizontal_hessian(h, z, p).norm() < 1e-9);

  const SmoothFunction s = [](const Point& q) { return std::sin(q.v[0]) * std::exp(q.z[0]); };
  // X1 s = cos(v1) e^z + (v2/2) sin(v1) e^z
  const double expect = std::cos(0.4) * std::exp(0.7) + (-0.15) * std::sin(0.4) * std::exp(0.7);
  const OracleEstimate est = oracle_first(h, s, p, 0);
  CHECK(est.value == doctest::Approx(expect).epsilon(1e-9));
  CHECK(est.error < 1e-6);
  CHECK(directional_derivative_oracle(h, s, p, 0, 1) == doctest::Approx(expect).epsilon(1e-9));
  CHECK_THROWS(directional_derivative_oracle(h, s, p, 0, 3));
}

TEST_CASE("interpolation and CSV round trip") {
  const Grid g({0, 0}, {1, 2}, {3, 5});
  const ScalarField u = ScalarField::sample(g, [](const Vec& x) { return 1 + x[0] + 2 * x[1] + x[0] * x[1]; }, 0.5);
  CHECK(u.interpolate(vec({0.3, 1.7})) == doctest::Approx(1 + 0.3 + 3.4 + 0.51));
  CHECK(u.interpolate(vec({5, 0})) == doctest::Approx(2.0));  // clamped onto x = 1
  std::stringstream ss;
  write_csv(ss, u);
  std::string header;
  std::getline(std::stringstream(ss.str()), header);
  CHECK(header == "x1,x2,value");
  const ScalarField back = read_csv(ss, g);
  CHECK(back.values() == u.values());

  SymMatrixField m(g, 2);
  m.set(4, (Mat(2, 2) << 1, 2, 2, 3).finished());
  CHECK(m.at(4)(1, 0) == 2.0);
  std::stringstream ms;
  write_csv(ms, m);
  std::getline(ms, header);
  CHECK(header == "x1,x2,m_11,m_12,m_22");
}
