#include "carnotflow/field_calculus.hpp"

#include "carnotflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace carnotflow {

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(std::vector<double> lower, std::vector<double> upper, std::vector<int> counts,
           std::vector<std::string> names)
    : lower_(std::move(lower)), upper_(std::move(upper)), counts_(std::move(counts)), names_(std::move(names)) {
  const std::size_t d = counts_.size();
  if (d == 0 || lower_.size() != d || upper_.size() != d)
    throw std::invalid_argument("grid bounds and counts must have the same nonzero length");
  if (d > static_cast<std::size_t>(kMaxDim)) throw std::invalid_argument("too many grid axes");
  if (names_.empty())
    for (std::size_t a = 0; a < d; ++a) names_.push_back("x" + std::to_string(a + 1));
  if (names_.size() != d) throw std::invalid_argument("grid axis names have wrong length");
  spacing_.resize(d);
  strides_.resize(d);
  for (std::size_t a = 0; a < d; ++a) {
    if (counts_[a] < 3) throw std::invalid_argument("grid needs at least 3 nodes per axis");
    if (!(upper_[a] > lower_[a])) throw std::invalid_argument("grid axis has non-positive extent");
    spacing_[a] = (upper_[a] - lower_[a]) / (counts_[a] - 1);
  }
  size_ = 1;
  for (std::size_t a = d; a-- > 0;) {
    strides_[a] = size_;
    size_ *= static_cast<std::size_t>(counts_[a]);
  }
}

Grid Grid::for_group(const GroupSpec& spec, const std::vector<double>& lower,
                     const std::vector<double>& upper, const std::vector<int>& counts) {
  if (static_cast<int>(counts.size()) != spec.dim())
    throw std::invalid_argument("grid axis count must equal m1 + m2");
  std::vector<std::string> names;
  for (int i = 0; i < spec.m1(); ++i) names.push_back("v" + std::to_string(i + 1));
  for (int k = 0; k < spec.m2(); ++k) names.push_back("z" + std::to_string(k + 1));
  return Grid(lower, upper, counts, names);
}

double Grid::min_spacing() const { return *std::min_element(spacing_.begin(), spacing_.end()); }

std::size_t Grid::node(const std::vector<int>& idx) const {
  std::size_t n = 0;
  for (int a = 0; a < axes(); ++a) n += static_cast<std::size_t>(idx[static_cast<std::size_t>(a)]) * stride(a);
  return n;
}

Vec Grid::coords(std::size_t node) const {
  Vec x(axes());
  for (int a = 0; a < axes(); ++a) x[a] = coordinate(a, index(node, a));
  return x;
}

bool Grid::is_interior(std::size_t node) const {
  for (int a = 0; a < axes(); ++a) {
    const int i = index(node, a);
    if (i == 0 || i == count(a) - 1) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Fields

ScalarField::ScalarField(Grid grid, std::vector<double> values, std::optional<double> time)
    : grid_(std::move(grid)), values_(std::move(values)), time_(time) {
  if (values_.size() != grid_.size()) throw std::invalid_argument("field value count does not match grid");
}

ScalarField ScalarField::sample(const Grid& grid, const std::function<double(const Vec&)>& fn,
                                std::optional<double> time) {
  std::vector<double> values(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) values[n] = fn(grid.coords(n));
  return ScalarField(grid, std::move(values), time);
}

double ScalarField::interpolate(const Vec& coords) const {
  const int d = grid_.axes();
  if (coords.size() != d) throw std::invalid_argument("interpolation point has wrong dimension");
  std::vector<int> base(static_cast<std::size_t>(d));
  std::vector<double> frac(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    const double x = std::clamp(coords[a], grid_.lower(a), grid_.upper(a));
    const double s = (x - grid_.lower(a)) / grid_.spacing(a);
    const int i = std::clamp(static_cast<int>(std::floor(s)), 0, grid_.count(a) - 2);
    base[static_cast<std::size_t>(a)] = i;
    frac[static_cast<std::size_t>(a)] = s - i;
  }
  double acc = 0.0;
  for (unsigned corner = 0; corner < (1u << d); ++corner) {
    double w = 1.0;
    std::size_t node = 0;
    for (int a = 0; a < d; ++a) {
      const bool up = (corner >> a) & 1u;
      const double f = frac[static_cast<std::size_t>(a)];
      w *= up ? f : 1.0 - f;
      node += static_cast<std::size_t>(base[static_cast<std::size_t>(a)] + (up ? 1 : 0)) * grid_.stride(a);
    }
    if (w != 0.0) acc += w * values_[node];
  }
  return acc;
}

VectorField::VectorField(Grid grid, int components)
    : grid_(std::move(grid)), components_(components),
      data_(grid_.size() * static_cast<std::size_t>(components), 0.0) {}

Vec VectorField::at(std::size_t node) const {
  Vec out(components_);
  for (int c = 0; c < components_; ++c) out[c] = data_[node * static_cast<std::size_t>(components_) + static_cast<std::size_t>(c)];
  return out;
}

void VectorField::set(std::size_t node, const Vec& value) {
  for (int c = 0; c < components_; ++c) data_[node * static_cast<std::size_t>(components_) + static_cast<std::size_t>(c)] = value[c];
}

SymMatrixField::SymMatrixField(Grid grid, int n)
    : grid_(std::move(grid)), n_(n), data_(grid_.size() * static_cast<std::size_t>(n * (n + 1) / 2), 0.0) {}

Mat SymMatrixField::at(std::size_t node) const {
  Mat m(n_, n_);
  const double* p = data_.data() + node * static_cast<std::size_t>(n_ * (n_ + 1) / 2);
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) m(i, j) = m(j, i) = *p++;
  return m;
}

void SymMatrixField::set(std::size_t node, const Mat& m) {
  double* p = data_.data() + node * static_cast<std::size_t>(n_ * (n_ + 1) / 2);
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) *p++ = m(i, j);
}

// ---------------------------------------------------------------------------
// Stencils

namespace {

struct Stencil {
  int offset[4];
  double weight[4];
  int size;
};

Stencil first_derivative(int i, int n, double h) {
  if (i == 0) return {{0, 1, 2, 0}, {-1.5 / h, 2.0 / h, -0.5 / h, 0}, 3};
  if (i == n - 1) return {{0, -1, -2, 0}, {1.5 / h, -2.0 / h, 0.5 / h, 0}, 3};
  return {{-1, 1, 0, 0}, {-0.5 / h, 0.5 / h, 0, 0}, 2};
}

Stencil second_derivative(int i, int n, double h) {
  const double h2 = h * h;
  if (i == 0) {
    if (n >= 4) return {{0, 1, 2, 3}, {2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2}, 4};
    return {{0, 1, 2, 0}, {1.0 / h2, -2.0 / h2, 1.0 / h2, 0}, 3};
  }
  if (i == n - 1) {
    if (n >= 4) return {{0, -1, -2, -3}, {2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2}, 4};
    return {{0, -1, -2, 0}, {1.0 / h2, -2.0 / h2, 1.0 / h2, 0}, 3};
  }
  return {{-1, 0, 1, 0}, {1.0 / h2, -2.0 / h2, 1.0 / h2, 0}, 3};
}

}  // namespace

EuclideanJet euclidean_jet(const ScalarField& u, std::size_t node) {
  const Grid& g = u.grid();
  const int d = g.axes();
  const auto& val = u.values();
  const auto base = static_cast<std::ptrdiff_t>(node);
  Stencil first[kMaxDim];
  for (int a = 0; a < d; ++a) first[a] = first_derivative(g.index(node, a), g.count(a), g.spacing(a));

  EuclideanJet jet{Vec::Zero(d), Mat::Zero(d, d)};
  for (int a = 0; a < d; ++a) {
    const auto sa = static_cast<std::ptrdiff_t>(g.stride(a));
    double acc = 0.0;
    for (int p = 0; p < first[a].size; ++p) acc += first[a].weight[p] * val[static_cast<std::size_t>(base + first[a].offset[p] * sa)];
    jet.gradient[a] = acc;

    const Stencil s2 = second_derivative(g.index(node, a), g.count(a), g.spacing(a));
    acc = 0.0;
    for (int p = 0; p < s2.size; ++p) acc += s2.weight[p] * val[static_cast<std::size_t>(base + s2.offset[p] * sa)];
    jet.hessian(a, a) = acc;

    for (int b = a + 1; b < d; ++b) {
      const auto sb = static_cast<std::ptrdiff_t>(g.stride(b));
      acc = 0.0;
      for (int p = 0; p < first[a].size; ++p)
        for (int q = 0; q < first[b].size; ++q)
          acc += first[a].weight[p] * first[b].weight[q] *
                 val[static_cast<std::size_t>(base + first[a].offset[p] * sa + first[b].offset[q] * sb)];
      jet.hessian(a, b) = jet.hessian(b, a) = acc;
    }
  }
  return jet;
}

HorizontalJet horizontal_jet(const GroupSpec& spec, const Vec& coords, const Vec& gradient,
                             const Mat& hessian) {
  const int m1 = spec.m1();
  const Mat a = frame(spec, coords).a;
  HorizontalJet jet;
  jet.gradient = a * gradient;
  Mat m = a * hessian * a.transpose();
  // First-order part: only d_{v_i} a_{j, z_q} = 1/2 c[q][i][j] is nonzero.
  for (int q = 0; q < spec.m2(); ++q) {
    const double dz = gradient[m1 + q];
    if (dz == 0.0) continue;
    for (int i = 0; i < m1; ++i)
      for (int j = 0; j < m1; ++j) m(i, j) += 0.5 * spec.bracket_coeff(q, i, j) * dz;
  }
  jet.hessian = 0.5 * (m + m.transpose());
  return jet;
}

VectorField euclidean_partials(const ScalarField& u) {
  VectorField out(u.grid(), u.grid().axes());
  parallel_for(u.grid().size(), [&](std::size_t n) { out.set(n, euclidean_jet(u, n).gradient); });
  return out;
}

VectorField horizontal_gradient(const GroupSpec& spec, const ScalarField& u) {
  if (u.grid().axes() != spec.dim()) throw std::invalid_argument("grid is not compatible with group");
  VectorField out(u.grid(), spec.m1());
  parallel_for(u.grid().size(), [&](std::size_t n) {
    const EuclideanJet e = euclidean_jet(u, n);
    out.set(n, frame(spec, u.grid().coords(n)).a * e.gradient);
  });
  return out;
}

VectorField second_layer_gradient(const GroupSpec& spec, const ScalarField& u) {
  if (spec.step() != 2) throw std::invalid_argument("second-layer gradient needs a step-2 group");
  if (u.grid().axes() != spec.dim()) throw std::invalid_argument("grid is not compatible with group");
  VectorField out(u.grid(), spec.m2());
  parallel_for(u.grid().size(), [&](std::size_t n) {
    out.set(n, euclidean_jet(u, n).gradient.tail(spec.m2()));
  });
  return out;
}

SymMatrixField horizontal_hessian(const GroupSpec& spec, const ScalarField& u) {
  if (u.grid().axes() != spec.dim()) throw std::invalid_argument("grid is not compatible with group");
  SymMatrixField out(u.grid(), spec.m1());
  parallel_for(u.grid().size(), [&](std::size_t n) {
    const EuclideanJet e = euclidean_jet(u, n);
    out.set(n, horizontal_jet(spec, u.grid().coords(n), e.gradient, e.hessian).hessian);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalues

Vec symmetric_eigenvalues(const Mat& m) {
  const auto n = m.rows();
  if (m.cols() != n) throw std::invalid_argument("matrix is not square");
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
    throw std::invalid_argument("matrix is not symmetric");

  Mat a = 0.5 * (m + m.transpose());
  const double norm = a.norm();
  if (norm == 0.0) return Vec::Zero(n);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) < 1e-12 * norm) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = arp - s * (arq + arp * tau);
          a(r, q) = a(q, r) = arq + s * (arp - arq * tau);
        }
      }
    }
  }
  Vec eig = a.diagonal();
  std::sort(eig.data(), eig.data() + eig.size());
  return eig;
}

double det_plus(const Mat& m) {
  const Vec eig = symmetric_eigenvalues(m);
  const double floor = 1e-12 * m.norm();
  double prod = 1.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (eig[i] <= floor) return 0.0;
    prod *= eig[i];
  }
  return prod;
}

double min_eigenvalue(const Mat& m) { return symmetric_eigenvalues(m)[0]; }

// ---------------------------------------------------------------------------
// Derivative oracle

namespace {

OracleEstimate richardson(const std::function<double(double)>& f, const OracleOptions& opts) {
  const int levels = std::max(2, opts.levels);
  std::vector<std::vector<double>> table(static_cast<std::size_t>(levels));
  double h = opts.step;
  for (int k = 0; k < levels; ++k, h *= 0.5) {
    auto& row = table[static_cast<std::size_t>(k)];
    row.push_back((f(h) - f(-h)) / (2.0 * h));
    double factor = 4.0;
    for (int j = 1; j <= k; ++j, factor *= 4.0) {
      const double prev = table[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j - 1)];
      row.push_back(row[static_cast<std::size_t>(j - 1)] + (row[static_cast<std::size_t>(j - 1)] - prev) / (factor - 1.0));
    }
  }
  const double best = table.back().back();
  const double prev = table[static_cast<std::size_t>(levels - 2)].back();
  return {best, std::abs(best - prev)};
}

}  // namespace

OracleEstimate oracle_first(const GroupSpec& spec, const SmoothFunction& u, const Point& p, int i,
                            const OracleOptions& opts) {
  if (i < 0 || i >= spec.m1()) throw std::invalid_argument("horizontal direction index out of range");
  return richardson([&](double s) { return u(product(spec, p, horizontal_exp(spec, i, s))); }, opts);
}

OracleEstimate oracle_second(const GroupSpec& spec, const SmoothFunction& u, const Point& p, int i,
                             int j, const OracleOptions& opts) {
  if (i < 0 || i >= spec.m1()) throw std::invalid_argument("horizontal direction index out of range");
  double inner_error = 0.0;
  OracleEstimate outer = richardson(
      [&](double s) {
        const OracleEstimate inner = oracle_first(spec, u, product(spec, p, horizontal_exp(spec, i, s)), j, opts);
        inner_error = std::max(inner_error, inner.error);
        return inner.value;
      },
      opts);
  outer.error += inner_error;
  return outer;
}

double directional_derivative_oracle(const GroupSpec& spec, const SmoothFunction& u, const Point& p,
                                     int i, int order, const OracleOptions& opts) {
  if (order == 1) return oracle_first(spec, u, p, i, opts).value;
  if (order == 2) return oracle_second(spec, u, p, i, i, opts).value;
  throw std::invalid_argument("oracle order must be 1 or 2");
}

Vec oracle_horizontal_gradient(const GroupSpec& spec, const SmoothFunction& u, const Point& p,
                               const OracleOptions& opts) {
  Vec g(spec.m1());
  for (int i = 0; i < spec.m1(); ++i) g[i] = oracle_first(spec, u, p, i, opts).value;
  return g;
}

Mat oracle_horizontal_hessian(const GroupSpec& spec, const SmoothFunction& u, const Point& p,
                              const OracleOptions& opts) {
  const int m1 = spec.m1();
  Mat h(m1, m1);
  for (int i = 0; i < m1; ++i)
    for (int j = 0; j < m1; ++j) h(i, j) = oracle_second(spec, u, p, i, j, opts).value;
  return 0.5 * (h + h.transpose());
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_coords(std::ostream& out, const Grid& g, std::size_t node) {
  for (int a = 0; a < g.axes(); ++a) out << fmt(g.coordinate(a, g.index(node, a))) << ',';
}

}  // namespace

void write_csv(std::ostream& out, const ScalarField& u) {
  const Grid& g = u.grid();
  for (const auto& name : g.names()) out << name << ',';
  out << "value\n";
  for (std::size_t n = 0; n < g.size(); ++n) {
    write_coords(out, g, n);
    out << fmt(u[n]) << '\n';
  }
}

void write_csv(std::ostream& out, const SymMatrixField& m) {
  const Grid& g = m.grid();
  for (const auto& name : g.names()) out << name << ',';
  for (int i = 0; i < m.n(); ++i)
    for (int j = i; j < m.n(); ++j) out << "m_" << i + 1 << j + 1 << (i == m.n() - 1 && j == m.n() - 1 ? "\n" : ",");
  for (std::size_t n = 0; n < g.size(); ++n) {
    write_coords(out, g, n);
    const Mat a = m.at(n);
    for (int i = 0; i < m.n(); ++i)
      for (int j = i; j < m.n(); ++j) out << fmt(a(i, j)) << (i == m.n() - 1 && j == m.n() - 1 ? "\n" : ",");
  }
}

ScalarField read_csv(std::istream& in, const Grid& grid) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV input");
  std::vector<double> values;
  values.reserve(grid.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    values.push_back(std::stod(line.substr(comma == std::string::npos ? 0 : comma + 1)));
  }
  if (values.size() != grid.size()) throw std::runtime_error("CSV row count does not match grid");
  return ScalarField(grid, std::move(values));
}

}  // namespace carnotflow
