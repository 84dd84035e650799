#include "carnotflow/group_algebra.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace carnotflow {

namespace {

constexpr double kHtypeTol = 1e-12;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_point(const GroupSpec& spec, const Point& p) {
  require(p.v.size() == spec.m1() && p.z.size() == spec.m2(),
          "point dimensions do not match group (m1=" + std::to_string(spec.m1()) +
              ", m2=" + std::to_string(spec.m2()) + ")");
}

// max |(sum z_k J_k)^2 + |z|^2 I| for one coefficient vector z.
double htype_defect(const std::vector<Mat>& J, const Vec& z) {
  const auto n = J.front().rows();
  Mat Jz = Mat::Zero(n, n);
  for (std::size_t k = 0; k < J.size(); ++k) Jz += z[static_cast<int>(k)] * J[k];
  Mat sq = Jz * Jz;
  sq += z.squaredNorm() * Mat::Identity(n, n);
  return sq.cwiseAbs().maxCoeff();
}

}  // namespace

GroupSpec GroupSpec::from_brackets(int m1, int m2, std::vector<double> brackets) {
  require(m1 >= 1, "m1 must be positive");
  require(m2 >= 0, "m2 must be nonnegative");
  require(m1 + m2 <= kMaxDim, "group dimension exceeds " + std::to_string(kMaxDim));
  require(brackets.size() == static_cast<std::size_t>(m2 * m1 * m1),
          "bracket tensor must have m2*m1*m1 entries");
  GroupSpec spec;
  spec.m1_ = m1;
  spec.m2_ = m2;
  spec.c_ = std::move(brackets);
  for (int k = 0; k < m2; ++k)
    for (int i = 0; i < m1; ++i)
      for (int j = 0; j < m1; ++j)
        require(spec.bracket_coeff(k, i, j) == -spec.bracket_coeff(k, j, i),
                "bracket tensor is not antisymmetric at (" + std::to_string(k) + "," +
                    std::to_string(i) + "," + std::to_string(j) + ")");
  return spec;
}

Vec GroupSpec::bracket(const Vec& u, const Vec& w) const {
  Vec out = Vec::Zero(m2_);
  for (int k = 0; k < m2_; ++k) {
    double acc = 0.0;
    for (int i = 0; i < m1_; ++i)
      for (int j = 0; j < m1_; ++j) acc += bracket_coeff(k, i, j) * u[i] * w[j];
    out[k] = acc;
  }
  return out;
}

GroupSpec make_euclidean(int n) {
  require(n >= 1, "euclidean dimension must be positive");
  return GroupSpec::from_brackets(n, 0, {});
}

GroupSpec make_htype(const std::vector<Mat>& J) {
  require(!J.empty(), "H-type structure needs at least one J map");
  const auto m1 = static_cast<int>(J.front().rows());
  const auto m2 = static_cast<int>(J.size());
  for (const auto& Jk : J) {
    require(Jk.rows() == m1 && Jk.cols() == m1, "J maps must all be square of equal size");
    require((Jk + Jk.transpose()).cwiseAbs().maxCoeff() <= kHtypeTol, "J map is not antisymmetric");
  }
  // Canonical basis vectors and their pairwise normalized sums; together these
  // force J_a^2 = -I and J_a J_b + J_b J_a = 0, i.e. the identity for every z.
  for (int a = 0; a < m2; ++a) {
    Vec z = Vec::Zero(m2);
    z[a] = 1.0;
    require(htype_defect(J, z) <= kHtypeTol,
            "H-type identity J_z^2 = -|z|^2 I fails for z = e_" + std::to_string(a));
    for (int b = a + 1; b < m2; ++b) {
      Vec zb = Vec::Zero(m2);
      zb[a] = zb[b] = std::sqrt(0.5);
      require(htype_defect(J, zb) <= kHtypeTol, "J maps " + std::to_string(a) + " and " +
                                                    std::to_string(b) + " do not anticommute");
    }
  }
  std::vector<double> c(static_cast<std::size_t>(m2 * m1 * m1));
  for (int k = 0; k < m2; ++k)
    for (int i = 0; i < m1; ++i)
      for (int j = 0; j < m1; ++j)
        // <J_k e_i, e_j> is entry (j, i) of J_k.
        c[static_cast<std::size_t>((k * m1 + i) * m1 + j)] = J[static_cast<std::size_t>(k)](j, i);
  GroupSpec spec = GroupSpec::from_brackets(m1, m2, std::move(c));
  spec.J_ = J;
  return spec;
}

GroupSpec make_heisenberg(int n) {
  require(n >= 1, "Heisenberg index must be positive");
  Mat J = Mat::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    J(i, n + i) = 1.0;
    J(n + i, i) = -1.0;
  }
  return make_htype({J});
}

GroupSpec make_quaternionic() {
  // Columns are the images of the basis (1, i, j, k) under left multiplication.
  Mat Li = Mat::Zero(4, 4), Lj = Mat::Zero(4, 4), Lk = Mat::Zero(4, 4);
  Li(1, 0) = 1;  Li(0, 1) = -1; Li(3, 2) = 1;  Li(2, 3) = -1;
  Lj(2, 0) = 1;  Lj(3, 1) = -1; Lj(0, 2) = -1; Lj(1, 3) = 1;
  Lk(3, 0) = 1;  Lk(2, 1) = 1;  Lk(1, 2) = -1; Lk(0, 3) = -1;
  return make_htype({Li, Lj, Lk});
}

GroupSpec adjoin_real_line(const GroupSpec& spec) {
  const int m1 = spec.m1() + 1;
  const int m2 = spec.m2();
  std::vector<double> c(static_cast<std::size_t>(m2 * m1 * m1), 0.0);
  for (int k = 0; k < m2; ++k)
    for (int i = 0; i < spec.m1(); ++i)
      for (int j = 0; j < spec.m1(); ++j)
        c[static_cast<std::size_t>((k * m1 + i) * m1 + j)] = spec.bracket_coeff(k, i, j);
  // The extra direction breaks J_z^2 = -|z|^2 I, so the result is not H-type.
  return GroupSpec::from_brackets(m1, m2, std::move(c));
}

Point identity(const GroupSpec& spec) {
  return Point{Vec::Zero(spec.m1()), Vec::Zero(spec.m2())};
}

Point make_point(const GroupSpec& spec, const Vec& v, const Vec& z) {
  Point p{v, z};
  check_point(spec, p);
  return p;
}

Point product(const GroupSpec& spec, const Point& p, const Point& q) {
  check_point(spec, p);
  check_point(spec, q);
  Point r{p.v + q.v, p.z + q.z};
  if (spec.m2() > 0) r.z += 0.5 * spec.bracket(p.v, q.v);
  return r;
}

Point inverse(const GroupSpec& spec, const Point& p) {
  check_point(spec, p);
  return Point{-p.v, -p.z};
}

Point dilate(const GroupSpec& spec, double s, const Point& p) {
  require(s > 0.0, "dilation factor must be positive");
  check_point(spec, p);
  return Point{s * p.v, (s * s) * p.z};
}

Point horizontal_exp(const GroupSpec& spec, int i, double s) {
  Point e = identity(spec);
  e.v[i] = s;
  return e;
}

double gauge_norm_power(const GroupSpec& spec, const Point& p) {
  check_point(spec, p);
  const double v2 = p.v.squaredNorm();
  if (spec.step() == 1) return v2;
  return v2 * v2 + p.z.squaredNorm();
}

double gauge_norm(const GroupSpec& spec, const Point& p) {
  const double power = gauge_norm_power(spec, p);
  return spec.step() == 1 ? std::sqrt(power) : std::sqrt(std::sqrt(power));
}

double gauge_distance(const GroupSpec& spec, const Point& p, const Point& q) {
  return gauge_norm(spec, product(spec, inverse(spec, q), p));
}

FrameMatrix frame(const GroupSpec& spec, const Point& p) {
  check_point(spec, p);
  const int m1 = spec.m1();
  FrameMatrix f{Mat::Zero(m1, spec.dim())};
  f.a.leftCols(m1).setIdentity();
  // d/ds of p * exp(s e_i) = (v + s e_i, z + s/2 [v, e_i]).
  for (int i = 0; i < m1; ++i)
    for (int k = 0; k < spec.m2(); ++k) {
      double acc = 0.0;
      for (int j = 0; j < m1; ++j) acc += spec.bracket_coeff(k, j, i) * p.v[j];
      f.a(i, m1 + k) = 0.5 * acc;
    }
  return f;
}

FrameMatrix frame(const GroupSpec& spec, const Vec& coords) {
  return frame(spec, from_coordinates(spec, coords));
}

Vec htype_apply_J(const GroupSpec& spec, const Vec& z, const Vec& u) {
  require(spec.is_htype(), "group is not of H-type");
  require(z.size() == spec.m2() && u.size() == spec.m1(), "J_z argument dimensions mismatch");
  Vec out = Vec::Zero(spec.m1());
  for (int k = 0; k < spec.m2(); ++k) out += z[k] * (spec.htype_J()[static_cast<std::size_t>(k)] * u);
  return out;
}

Vec to_coordinates(const Point& p) {
  Vec x(p.v.size() + p.z.size());
  x << p.v, p.z;
  return x;
}

Point from_coordinates(const GroupSpec& spec, const Vec& coords) {
  require(coords.size() == spec.dim(), "coordinate vector has wrong length");
  return Point{coords.head(spec.m1()), coords.tail(spec.m2())};
}

nlohmann::json to_json(const GroupSpec& spec) {
  nlohmann::json doc;
  doc["step"] = spec.step();
  doc["m1"] = spec.m1();
  doc["m2"] = spec.m2();
  auto brackets = nlohmann::json::array();
  for (int k = 0; k < spec.m2(); ++k)
    for (int i = 0; i < spec.m1(); ++i)
      for (int j = i + 1; j < spec.m1(); ++j)
        if (const double c = spec.bracket_coeff(k, i, j); c != 0.0)
          brackets.push_back({k, i, j, c});
  doc["brackets"] = brackets;
  if (spec.is_htype()) {
    auto js = nlohmann::json::array();
    for (const auto& J : spec.htype_J()) {
      auto rows = nlohmann::json::array();
      for (int r = 0; r < J.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (int c = 0; c < J.cols(); ++c) row.push_back(J(r, c));
        rows.push_back(row);
      }
      js.push_back(rows);
    }
    doc["htype_J"] = js;
  }
  return doc;
}

GroupSpec group_from_json(const nlohmann::json& doc) {
  require(doc.is_object(), "group spec must be a JSON object");
  if (doc.contains("htype_J") && !doc["htype_J"].is_null()) {
    std::vector<Mat> J;
    for (const auto& rows : doc["htype_J"]) {
      const auto n = static_cast<int>(rows.size());
      Mat m(n, n);
      for (int r = 0; r < n; ++r) {
        require(static_cast<int>(rows[static_cast<std::size_t>(r)].size()) == n, "htype_J matrices must be square");
        for (int c = 0; c < n; ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
      }
      J.push_back(m);
    }
    GroupSpec spec = make_htype(J);
    if (doc.contains("m1")) require(doc["m1"].get<int>() == spec.m1(), "m1 disagrees with htype_J");
    if (doc.contains("m2")) require(doc["m2"].get<int>() == spec.m2(), "m2 disagrees with htype_J");
    return spec;
  }
  require(doc.contains("m1"), "group spec is missing 'm1'");
  const int m1 = doc["m1"].get<int>();
  const int m2 = doc.value("m2", 0);
  if (doc.contains("step")) {
    const int step = doc["step"].get<int>();
    require(step == 1 || step == 2, "only step 1 and step 2 groups are supported");
    require((step == 1) == (m2 == 0), "step must be 1 exactly when m2 = 0");
  }
  require(m1 >= 1 && m2 >= 0 && m1 + m2 <= kMaxDim, "invalid layer dimensions");
  std::vector<double> c(static_cast<std::size_t>(m2 * m1 * m1), 0.0);
  std::vector<bool> seen(c.size(), false);
  auto at = [&](int k, int i, int j) { return static_cast<std::size_t>((k * m1 + i) * m1 + j); };
  for (const auto& entry : doc.value("brackets", nlohmann::json::array())) {
    require(entry.is_array() && entry.size() == 4, "bracket entries must be [k,i,j,value]");
    const int k = entry[0].get<int>(), i = entry[1].get<int>(), j = entry[2].get<int>();
    const double value = entry[3].get<double>();
    require(k >= 0 && k < m2 && i >= 0 && i < m1 && j >= 0 && j < m1, "bracket index out of range");
    require(i != j || value == 0.0, "bracket [e_i, e_i] must vanish");
    if (seen[at(k, i, j)]) require(c[at(k, i, j)] == value, "conflicting bracket entries");
    c[at(k, i, j)] = value;
    c[at(k, j, i)] = -value;
    seen[at(k, i, j)] = seen[at(k, j, i)] = true;
  }
  return GroupSpec::from_brackets(m1, m2, std::move(c));
}

}  // namespace carnotflow
