#pragma once

// Step-1 and step-2 Carnot groups in exponential coordinates.
//
// A point is written (v, z) with v in the first layer and z in the second.
// The group law is the step-2 Baker-Campbell-Hausdorff product
//
//   (v, z) * (v', z') = (v + v', z + z' + 1/2 [v, v'])
//
// with [u, w]_k = sum_ij c[k][i][j] u_i w_j. Left-invariant horizontal
// frames are obtained by differentiating this law, never hard-coded, so
// every sign convention follows from the bracket tensor alone.

#include <Eigen/Core>
#include "json.hpp"

#include <vector>

namespace carnotflow {

inline constexpr int kMaxDim = 16;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Exponential coordinates of a group element.
struct Point {
  Vec v;  // first layer
  Vec z;  // second layer
};

class GroupSpec {
 public:
  /// Builds a spec from a dense bracket tensor laid out as c[(k*m1 + i)*m1 + j].
  /// Throws std::invalid_argument unless the tensor is antisymmetric in (i, j).
  static GroupSpec from_brackets(int m1, int m2, std::vector<double> brackets);

  int step() const { return m2_ == 0 ? 1 : 2; }
  int m1() const { return m1_; }
  int m2() const { return m2_; }
  int dim() const { return m1_ + m2_; }
  /// Q = m1 + 2 m2.
  int homogeneous_dimension() const { return m1_ + 2 * m2_; }

  double bracket_coeff(int k, int i, int j) const {
    return c_[static_cast<std::size_t>((k * m1_ + i) * m1_ + j)];
  }
  const std::vector<double>& bracket_tensor() const { return c_; }

  /// [u, w] in the second layer.
  Vec bracket(const Vec& u, const Vec& w) const;

  bool is_htype() const { return !J_.empty(); }
  const std::vector<Mat>& htype_J() const { return J_; }

  friend bool operator==(const GroupSpec& a, const GroupSpec& b) {
    return a.m1_ == b.m1_ && a.m2_ == b.m2_ && a.c_ == b.c_;
  }

 private:
  friend GroupSpec make_htype(const std::vector<Mat>& J);

  int m1_ = 0;
  int m2_ = 0;
  std::vector<double> c_;
  std::vector<Mat> J_;
};

/// Euclidean space R^n as a step-1 group.
GroupSpec make_euclidean(int n);

/// H-type group from a family of antisymmetric m1 x m1 matrices with
/// (sum_k z_k J_k)^2 = -|z|^2 I. Brackets are c[k][i][j] = <J_k e_i, e_j>.
GroupSpec make_htype(const std::vector<Mat>& J);

/// Heisenberg group H^n: m1 = 2n, m2 = 1, J = [[0, I_n], [-I_n, 0]].
GroupSpec make_heisenberg(int n);

/// The H-type group R^4 x R^3 built from left multiplication by i, j, k on
/// the quaternions.
GroupSpec make_quaternionic();

/// G x R: one more first-layer direction that commutes with everything.
GroupSpec adjoin_real_line(const GroupSpec& spec);

Point identity(const GroupSpec& spec);
Point make_point(const GroupSpec& spec, const Vec& v, const Vec& z);

Point product(const GroupSpec& spec, const Point& p, const Point& q);
Point inverse(const GroupSpec& spec, const Point& p);
/// delta_s(v, z) = (s v, s^2 z). Throws for s <= 0.
Point dilate(const GroupSpec& spec, double s, const Point& p);

/// exp(s X_i) for the i-th first-layer basis direction.
Point horizontal_exp(const GroupSpec& spec, int i, double s);

/// (sum_j |x_j|^{2 r!/j})^{1/(2 r!)}; (|v|^4 + |z|^2)^{1/4} at step 2.
double gauge_norm(const GroupSpec& spec, const Point& p);
/// |p|_g^{2 r!} without the root. Polynomial, so usable as a smooth kernel.
double gauge_norm_power(const GroupSpec& spec, const Point& p);
double gauge_distance(const GroupSpec& spec, const Point& p, const Point& q);

/// Row i holds the Euclidean coefficients of X_i at p.
struct FrameMatrix {
  Mat a;  // m1 x (m1 + m2)
};

FrameMatrix frame(const GroupSpec& spec, const Point& p);
FrameMatrix frame(const GroupSpec& spec, const Vec& coords);

/// J_z(u) = sum_k z_k J_k u. Throws std::invalid_argument for non H-type specs.
Vec htype_apply_J(const GroupSpec& spec, const Vec& z, const Vec& u);

/// Flattened (v, z) and back.
Vec to_coordinates(const Point& p);
Point from_coordinates(const GroupSpec& spec, const Vec& coords);

/// {"step":2,"m1":2,"m2":1,"brackets":[[k,i,j,value],...],"htype_J":[...]}
nlohmann::json to_json(const GroupSpec& spec);
GroupSpec group_from_json(const nlohmann::json& doc);

}  // namespace carnotflow
