#pragma once

// Grid fields over exponential coordinates and the horizontal calculus on
// them: Euclidean finite differences pushed through the left-invariant
// frame, det_+ via a cyclic Jacobi eigensolve, and a derivative oracle that
// differentiates closures along group exponentials instead of stencils.

#include "carnotflow/group_algebra.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace carnotflow {

/// Tensor-product grid. Axes are ordered v_1..v_m1, z_1..z_m2; the last axis
/// varies fastest in the node numbering.
class Grid {
 public:
  Grid(std::vector<double> lower, std::vector<double> upper, std::vector<int> counts,
       std::vector<std::string> names = {});

  /// Grid whose axes carry the names v1.., z1.. of the group coordinates.
  static Grid for_group(const GroupSpec& spec, const std::vector<double>& lower,
                        const std::vector<double>& upper, const std::vector<int>& counts);

  int axes() const { return static_cast<int>(counts_.size()); }
  std::size_t size() const { return size_; }
  int count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  double lower(int axis) const { return lower_[static_cast<std::size_t>(axis)]; }
  double upper(int axis) const { return upper_[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
  double min_spacing() const;
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }
  const std::vector<std::string>& names() const { return names_; }

  int index(std::size_t node, int axis) const {
    return static_cast<int>((node / strides_[static_cast<std::size_t>(axis)]) %
                            static_cast<std::size_t>(counts_[static_cast<std::size_t>(axis)]));
  }
  std::size_t node(const std::vector<int>& idx) const;
  double coordinate(int axis, int i) const { return lower(axis) + i * spacing(axis); }
  Vec coords(std::size_t node) const;
  bool is_interior(std::size_t node) const;

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.lower_ == b.lower_ && a.upper_ == b.upper_ && a.counts_ == b.counts_;
  }

 private:
  std::vector<double> lower_, upper_, spacing_;
  std::vector<int> counts_;
  std::vector<std::string> names_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

class ScalarField {
 public:
  ScalarField(Grid grid, std::vector<double> values, std::optional<double> time = std::nullopt);

  /// Samples fn at every node.
  static ScalarField sample(const Grid& grid, const std::function<double(const Vec&)>& fn,
                            std::optional<double> time = std::nullopt);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t node) const { return values_[node]; }
  double& operator[](std::size_t node) { return values_[node]; }
  std::optional<double> time() const { return time_; }
  void set_time(std::optional<double> t) { time_ = t; }

  /// Multilinear interpolation; points outside the box are clamped onto it.
  double interpolate(const Vec& coords) const;

 private:
  Grid grid_;
  std::vector<double> values_;
  std::optional<double> time_;
};

/// A fixed number of components per node.
class VectorField {
 public:
  VectorField(Grid grid, int components);
  const Grid& grid() const { return grid_; }
  int components() const { return components_; }
  Vec at(std::size_t node) const;
  void set(std::size_t node, const Vec& value);

 private:
  Grid grid_;
  int components_;
  std::vector<double> data_;
};

/// Symmetric n x n matrix per node; only the upper triangle is stored, so
/// at(node) is symmetric bit for bit.
class SymMatrixField {
 public:
  SymMatrixField(Grid grid, int n);
  const Grid& grid() const { return grid_; }
  int n() const { return n_; }
  Mat at(std::size_t node) const;
  /// Stores the upper triangle of m.
  void set(std::size_t node, const Mat& m);

 private:
  Grid grid_;
  int n_;
  std::vector<double> data_;
};

/// Euclidean gradient and Hessian of a field at one node.
struct EuclideanJet {
  Vec gradient;
  Mat hessian;
};

/// Second-order central differences at interior nodes, second-order
/// one-sided differences on the boundary (first order for second
/// derivatives on three-node axes).
EuclideanJet euclidean_jet(const ScalarField& u, std::size_t node);

/// D_0 u and (D_0^2 u)^* at a point from Euclidean derivatives.
struct HorizontalJet {
  Vec gradient;  // D_0 u
  Mat hessian;   // symmetrized horizontal Hessian
};

/// X_i X_j u = sum_kl a_ik a_jl d_kl u + sum_kl a_ik (d_k a_jl) d_l u, symmetrized.
HorizontalJet horizontal_jet(const GroupSpec& spec, const Vec& coords, const Vec& gradient,
                             const Mat& hessian);

VectorField euclidean_partials(const ScalarField& u);
VectorField horizontal_gradient(const GroupSpec& spec, const ScalarField& u);
/// D_1 u = d_z u. Throws std::invalid_argument on step-1 groups.
VectorField second_layer_gradient(const GroupSpec& spec, const ScalarField& u);
SymMatrixField horizontal_hessian(const GroupSpec& spec, const ScalarField& u);

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi,
/// stops once the off-diagonal norm is below 1e-12 |M|_F).
/// Throws std::invalid_argument for non-symmetric input.
Vec symmetric_eigenvalues(const Mat& m);

/// prod max(lambda_i, 0); eigenvalues within 1e-12 |M|_F of zero count as zero.
double det_plus(const Mat& m);
double min_eigenvalue(const Mat& m);

using SmoothFunction = std::function<double(const Point&)>;

struct OracleOptions {
  double step = 0.05;  // largest step in the Richardson table
  int levels = 4;
};

struct OracleEstimate {
  double value;
  double error;  // difference between the last two Richardson diagonals
};

/// X_i u(p) = d/ds u(p * exp(s X_i)) at s = 0 by central differences and
/// Richardson extrapolation.
OracleEstimate oracle_first(const GroupSpec& spec, const SmoothFunction& u, const Point& p, int i,
                            const OracleOptions& opts = {});
/// X_i X_j u(p), the outer derivative applied to the inner oracle.
OracleEstimate oracle_second(const GroupSpec& spec, const SmoothFunction& u, const Point& p, int i,
                             int j, const OracleOptions& opts = {});
/// order 1: X_i u(p); order 2: X_i X_i u(p).
double directional_derivative_oracle(const GroupSpec& spec, const SmoothFunction& u, const Point& p,
                                     int i, int order, const OracleOptions& opts = {});
Vec oracle_horizontal_gradient(const GroupSpec& spec, const SmoothFunction& u, const Point& p,
                               const OracleOptions& opts = {});
/// 1/2 (X_i X_j u + X_j X_i u).
Mat oracle_horizontal_hessian(const GroupSpec& spec, const SmoothFunction& u, const Point& p,
                              const OracleOptions& opts = {});

/// One row per node: coordinates then value, header names the axes.
void write_csv(std::ostream& out, const ScalarField& u);
/// Coordinates then the upper-triangle entries m_ij (1-based).
void write_csv(std::ostream& out, const SymMatrixField& m);
ScalarField read_csv(std::istream& in, const Grid& grid);

}  // namespace carnotflow
