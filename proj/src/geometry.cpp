#include "rsgd/geometry.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rsgd {

namespace {

// Flattened view of a (possibly nested) product: one entry per simple
// component with its block offsets.
struct Leaf {
  const ManifoldDescriptor* desc;
  int point_off;
  int tangent_off;
};

void collect_leaves(const ManifoldDescriptor& d, std::vector<Leaf>& out,
                    int& point_off, int& tangent_off) {
  if (d.kind() == ManifoldDescriptor::Kind::Product) {
    for (const auto& c : d.components()) collect_leaves(c, out, point_off, tangent_off);
    return;
  }
  out.push_back({&d, point_off, tangent_off});
  point_off += (d.kind() == ManifoldDescriptor::Kind::FixedRank) ? 3 : 1;
  tangent_off += 1;
}

std::vector<Leaf> leaves(const ManifoldDescriptor& d) {
  std::vector<Leaf> out;
  int po = 0, to = 0;
  collect_leaves(d, out, po, to);
  return out;
}

double clamp1(double v) { return std::max(-1.0, std::min(1.0, v)); }

// ---- sphere kernels --------------------------------------------------------

Matrix sphere_project(const Matrix& x, const Matrix& g) {
  return g - x.col(0).dot(g.col(0)) * x;
}

Matrix sphere_exp(const Matrix& x, const Matrix& v) {
  const double t = v.norm();
  if (t == 0.0) return x;
  return std::cos(t) * x + (std::sin(t) / t) * v;
}

double sphere_dist(const Matrix& x, const Matrix& y) {
  // arc length acos(<x, y>) evaluated through atan2, which stays well
  // conditioned at both ends of [0, pi]
  return 2.0 * std::atan2((x - y).norm(), (x + y).norm());
}

Matrix sphere_transport(const Matrix& x, const Matrix& y, const Matrix& v) {
  if (x == y) return v;
  const double c = clamp1(x.col(0).dot(y.col(0)));
  Matrix u = y - c * x;  // direction of log_x(y), unnormalized
  const double un = u.norm();
  if (un < 1e-12) return sphere_project(y, v);  // same or antipodal point
  u /= un;
  const double theta = std::acos(c);
  const double a = u.col(0).dot(v.col(0));
  Matrix moved = v + (std::cos(theta) - 1.0) * a * u - std::sin(theta) * a * x;
  return sphere_project(y, moved);
}

// ---- Stiefel kernels -------------------------------------------------------

Matrix sym(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix stiefel_project(const Matrix& x, const Matrix& g) {
  return g - x * sym(x.transpose() * g);
}

// Thin QR factor with positive diagonal R, the deterministic "qf" map.
Matrix stiefel_qf(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  Matrix r = qr.matrixQR().topLeftCorner(a.cols(), a.cols());
  const double scale = a.norm();
  for (Index j = 0; j < a.cols(); ++j) {
    const double rjj = r(j, j);
    if (std::abs(rjj) <= 1e-13 * scale)
      throw RankDeficiencyError("QR retraction hit a rank-deficient matrix");
    if (rjj < 0) q.col(j) = -q.col(j);
  }
  return q;
}

// ---- fixed-rank kernels ----------------------------------------------------

Matrix fixedrank_dense(const Matrix& u, const Matrix& s, const Matrix& v) {
  return u * s.col(0).asDiagonal() * v.transpose();
}

Matrix fixedrank_project(const Matrix& u, const Matrix& v, const Matrix& g) {
  const Matrix gv = g * v;                    // m x p
  const Matrix utg = u.transpose() * g;       // p x n
  const Matrix utgv = u.transpose() * gv;     // p x p
  return u * utg + gv * v.transpose() - u * (utgv * v.transpose());
}

// Rank-p re-truncation of (X + Z): with Z in T_X M the sum has rank <= 2p,
// so the SVD reduces to a (2p) x (2p) core.
void fixedrank_retract(const Matrix& u, const Matrix& s, const Matrix& v,
                       const Matrix& z, Matrix& u_out, Matrix& s_out,
                       Matrix& v_out) {
  const Index p = s.rows();
  const Matrix zv = z * v;                           // m x p
  const Matrix m = u.transpose() * zv;               // p x p
  const Matrix up = zv - u * m;                      // m x p, U^T up = 0
  const Matrix vp = z.transpose() * u - v * m.transpose();  // n x p

  Eigen::HouseholderQR<Matrix> qru(up);
  Matrix qu = qru.householderQ() * Matrix::Identity(up.rows(), p);
  Matrix ru = qru.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::HouseholderQR<Matrix> qrv(vp);
  Matrix qv = qrv.householderQ() * Matrix::Identity(vp.rows(), p);
  Matrix rv = qrv.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();

  Matrix core = Matrix::Zero(2 * p, 2 * p);
  core.topLeftCorner(p, p) = s.col(0).asDiagonal().toDenseMatrix() + m;
  core.topRightCorner(p, p) = rv.transpose();
  core.bottomLeftCorner(p, p) = ru;

  Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector sv = svd.singularValues();
  if (sv(p - 1) <= 1e-14 * sv(0))
    throw RankDeficiencyError("fixed-rank retraction produced a zero singular value");

  Matrix ublock(u.rows(), 2 * p);
  ublock << u, qu;
  Matrix vblock(v.rows(), 2 * p);
  vblock << v, qv;
  u_out = ublock * svd.matrixU().leftCols(p);
  v_out = vblock * svd.matrixV().leftCols(p);
  s_out = sv.head(p);
}

void fixedrank_renormalize(const Matrix& u, const Matrix& s, const Matrix& v,
                           Matrix& u_out, Matrix& s_out, Matrix& v_out) {
  const Index p = s.rows();
  Eigen::HouseholderQR<Matrix> qru(u);
  Matrix qu = qru.householderQ() * Matrix::Identity(u.rows(), p);
  Matrix ru = qru.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::HouseholderQR<Matrix> qrv(v);
  Matrix qv = qrv.householderQ() * Matrix::Identity(v.rows(), p);
  Matrix rv = qrv.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Matrix core = ru * s.col(0).asDiagonal() * rv.transpose();
  Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  u_out = qu * svd.matrixU();
  v_out = qv * svd.matrixV();
  s_out = svd.singularValues();
}

// ---- shared shape checks ---------------------------------------------------

void require_shapes(const Blocks& data,
                    const std::vector<std::pair<Index, Index>>& shapes,
                    const char* what) {
  if (data.size() != shapes.size())
    throw DimensionError(std::string(what) + ": expected " +
                         std::to_string(shapes.size()) + " blocks, got " +
                         std::to_string(data.size()));
  for (size_t i = 0; i < shapes.size(); ++i) {
    if (data[i].rows() != shapes[i].first || data[i].cols() != shapes[i].second)
      throw DimensionError(std::string(what) + ": block " + std::to_string(i) +
                           " has shape " + std::to_string(data[i].rows()) + "x" +
                           std::to_string(data[i].cols()) + ", expected " +
                           std::to_string(shapes[i].first) + "x" +
                           std::to_string(shapes[i].second));
  }
}

}  // namespace

// ---- descriptor ------------------------------------------------------------

ManifoldDescriptor ManifoldDescriptor::sphere(Index n) {
  if (n < 2) throw DimensionError("sphere requires n >= 2");
  ManifoldDescriptor d;
  d.kind_ = Kind::Sphere;
  d.dims_ = {n};
  return d;
}

ManifoldDescriptor ManifoldDescriptor::stiefel(Index n, Index p) {
  if (p < 1 || p > n) throw DimensionError("stiefel requires 1 <= p <= n");
  ManifoldDescriptor d;
  d.kind_ = Kind::Stiefel;
  d.dims_ = {n, p};
  return d;
}

ManifoldDescriptor ManifoldDescriptor::fixed_rank(Index m, Index n, Index p) {
  if (p < 1 || p > std::min(m, n))
    throw DimensionError("fixed_rank requires 1 <= p <= min(m, n)");
  ManifoldDescriptor d;
  d.kind_ = Kind::FixedRank;
  d.dims_ = {m, n, p};
  return d;
}

ManifoldDescriptor ManifoldDescriptor::euclidean(Index n) {
  if (n < 1) throw DimensionError("euclidean requires n >= 1");
  ManifoldDescriptor d;
  d.kind_ = Kind::Euclidean;
  d.dims_ = {n};
  return d;
}

ManifoldDescriptor ManifoldDescriptor::product(std::vector<ManifoldDescriptor> components) {
  if (components.empty()) throw DimensionError("product requires a nonempty component list");
  ManifoldDescriptor d;
  d.kind_ = Kind::Product;
  d.components_ = std::move(components);
  return d;
}

bool ManifoldDescriptor::operator==(const ManifoldDescriptor& other) const {
  return kind_ == other.kind_ && dims_ == other.dims_ &&
         components_ == other.components_;
}

std::string ManifoldDescriptor::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Sphere: os << "Sphere(" << dims_[0] << ")"; break;
    case Kind::Stiefel: os << "Stiefel(" << dims_[0] << "," << dims_[1] << ")"; break;
    case Kind::FixedRank:
      os << "FixedRank(" << dims_[0] << "," << dims_[1] << "," << dims_[2] << ")";
      break;
    case Kind::Euclidean: os << "Euclidean(" << dims_[0] << ")"; break;
    case Kind::Product: {
      os << "Product(";
      for (size_t i = 0; i < components_.size(); ++i)
        os << (i ? ", " : "") << components_[i].to_string();
      os << ")";
      break;
    }
  }
  return os.str();
}

// ---- block helpers ---------------------------------------------------------

Blocks zeros_like(const Blocks& b) {
  Blocks out;
  out.reserve(b.size());
  for (const auto& m : b) out.push_back(Matrix::Zero(m.rows(), m.cols()));
  return out;
}

bool blocks_zero(const Blocks& b) {
  for (const auto& m : b)
    if (!m.isZero(0.0)) return false;
  return true;
}

bool blocks_equal(const Blocks& a, const Blocks& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols() || a[i] != b[i])
      return false;
  return true;
}

bool blocks_finite(const Blocks& b) {
  for (const auto& m : b)
    if (!m.allFinite()) return false;
  return true;
}

Blocks add(const Blocks& a, const Blocks& b) {
  Blocks out = a;
  for (size_t i = 0; i < a.size(); ++i) out[i] += b[i];
  return out;
}

Blocks subtract(const Blocks& a, const Blocks& b) {
  Blocks out = a;
  for (size_t i = 0; i < a.size(); ++i) out[i] -= b[i];
  return out;
}

Blocks scale(const Blocks& a, double factor) {
  Blocks out = a;
  for (auto& m : out) m *= factor;
  return out;
}

double dot(const Blocks& a, const Blocks& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    s += (a[i].array() * b[i].array()).sum();
  return s;
}

double block_norm(const Blocks& a) { return std::sqrt(std::max(0.0, dot(a, a))); }

// ---- descriptor queries ----------------------------------------------------

int point_block_count(const ManifoldDescriptor& d) {
  int n = 0;
  for (const auto& leaf : leaves(d))
    n += (leaf.desc->kind() == ManifoldDescriptor::Kind::FixedRank) ? 3 : 1;
  return n;
}

int tangent_block_count(const ManifoldDescriptor& d) {
  return static_cast<int>(leaves(d).size());
}

std::vector<std::pair<Index, Index>> point_block_shapes(const ManifoldDescriptor& d) {
  std::vector<std::pair<Index, Index>> shapes;
  for (const auto& leaf : leaves(d)) {
    const auto& dims = leaf.desc->dims();
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere:
      case ManifoldDescriptor::Kind::Euclidean:
        shapes.push_back({dims[0], 1});
        break;
      case ManifoldDescriptor::Kind::Stiefel:
        shapes.push_back({dims[0], dims[1]});
        break;
      case ManifoldDescriptor::Kind::FixedRank:
        shapes.push_back({dims[0], dims[2]});
        shapes.push_back({dims[2], 1});
        shapes.push_back({dims[1], dims[2]});
        break;
      case ManifoldDescriptor::Kind::Product:
        break;  // unreachable, leaves are simple
    }
  }
  return shapes;
}

std::vector<std::pair<Index, Index>> tangent_block_shapes(const ManifoldDescriptor& d) {
  std::vector<std::pair<Index, Index>> shapes;
  for (const auto& leaf : leaves(d)) {
    const auto& dims = leaf.desc->dims();
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere:
      case ManifoldDescriptor::Kind::Euclidean:
        shapes.push_back({dims[0], 1});
        break;
      case ManifoldDescriptor::Kind::Stiefel:
        shapes.push_back({dims[0], dims[1]});
        break;
      case ManifoldDescriptor::Kind::FixedRank:
        shapes.push_back({dims[0], dims[1]});  // full ambient m x n
        break;
      case ManifoldDescriptor::Kind::Product:
        break;
    }
  }
  return shapes;
}

Index manifold_dim(const ManifoldDescriptor& d) {
  Index total = 0;
  for (const auto& leaf : leaves(d)) {
    const auto& dims = leaf.desc->dims();
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere: total += dims[0] - 1; break;
      case ManifoldDescriptor::Kind::Euclidean: total += dims[0]; break;
      case ManifoldDescriptor::Kind::Stiefel:
        total += dims[0] * dims[1] - dims[1] * (dims[1] + 1) / 2;
        break;
      case ManifoldDescriptor::Kind::FixedRank:
        total += (dims[0] + dims[1] - dims[2]) * dims[2];
        break;
      case ManifoldDescriptor::Kind::Product: break;
    }
  }
  return total;
}

bool has_exp_map(const ManifoldDescriptor& d) {
  for (const auto& leaf : leaves(d)) {
    const auto k = leaf.desc->kind();
    if (k != ManifoldDescriptor::Kind::Sphere &&
        k != ManifoldDescriptor::Kind::Euclidean)
      return false;
  }
  return true;
}

std::string dist_kind(const ManifoldDescriptor& d) {
  for (const auto& leaf : leaves(d)) {
    const auto k = leaf.desc->kind();
    if (k == ManifoldDescriptor::Kind::Stiefel ||
        k == ManifoldDescriptor::Kind::FixedRank)
      return "ambient_frobenius_surrogate";
  }
  return "geodesic";
}

// ---- points ----------------------------------------------------------------

ManifoldPoint make_point(const ManifoldDescriptor& d, Blocks data, double tol) {
  require_shapes(data, point_block_shapes(d), "point");
  ManifoldPoint x{d, std::move(data)};
  validate_point(x, tol);
  return x;
}

double membership_defect(const ManifoldPoint& x) {
  double defect = 0.0;
  for (const auto& leaf : leaves(x.descriptor)) {
    const Blocks& b = x.data;
    const int o = leaf.point_off;
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere:
        defect = std::max(defect, std::abs(b[o].norm() - 1.0));
        break;
      case ManifoldDescriptor::Kind::Euclidean:
        break;
      case ManifoldDescriptor::Kind::Stiefel: {
        const Matrix& m = b[o];
        defect = std::max(
            defect, (m.transpose() * m - Matrix::Identity(m.cols(), m.cols())).norm());
        break;
      }
      case ManifoldDescriptor::Kind::FixedRank: {
        const Matrix& u = b[o];
        const Matrix& s = b[o + 1];
        const Matrix& v = b[o + 2];
        const Index p = s.rows();
        defect = std::max(
            defect, (u.transpose() * u - Matrix::Identity(p, p)).norm());
        defect = std::max(
            defect, (v.transpose() * v - Matrix::Identity(p, p)).norm());
        if (s.col(0).minCoeff() <= 0.0)
          defect = std::numeric_limits<double>::infinity();
        break;
      }
      case ManifoldDescriptor::Kind::Product:
        break;
    }
  }
  return defect;
}

void validate_point(const ManifoldPoint& x, double tol) {
  require_shapes(x.data, point_block_shapes(x.descriptor), "point");
  const double defect = membership_defect(x);
  if (!(defect <= tol))
    throw DomainError("point violates manifold invariants on " +
                      x.descriptor.to_string() + ": defect " +
                      std::to_string(defect));
}

bool same_point(const ManifoldPoint& a, const ManifoldPoint& b) {
  return a.descriptor == b.descriptor && blocks_equal(a.data, b.data);
}

Matrix dense(const ManifoldPoint& x) {
  switch (x.descriptor.kind()) {
    case ManifoldDescriptor::Kind::Sphere:
    case ManifoldDescriptor::Kind::Euclidean:
    case ManifoldDescriptor::Kind::Stiefel:
      return x.data[0];
    case ManifoldDescriptor::Kind::FixedRank:
      return fixedrank_dense(x.data[0], x.data[1], x.data[2]);
    case ManifoldDescriptor::Kind::Product:
      throw CapabilityError("dense() is not defined for product manifolds");
  }
  throw CapabilityError("unreachable");
}

Blocks ambient_coords(const ManifoldPoint& x) {
  Blocks out(static_cast<size_t>(tangent_block_count(x.descriptor)));
  for (const auto& leaf : leaves(x.descriptor)) {
    const int po = leaf.point_off;
    const int to = leaf.tangent_off;
    if (leaf.desc->kind() == ManifoldDescriptor::Kind::FixedRank)
      out[to] = fixedrank_dense(x.data[po], x.data[po + 1], x.data[po + 2]);
    else
      out[to] = x.data[po];
  }
  return out;
}

TangentVector zero_tangent(const ManifoldPoint& x) {
  Blocks data;
  for (const auto& [r, c] : tangent_block_shapes(x.descriptor))
    data.push_back(Matrix::Zero(r, c));
  return TangentVector{x, std::move(data)};
}

TangentVector make_tangent(const ManifoldPoint& x, Blocks data, double tol) {
  require_shapes(data, tangent_block_shapes(x.descriptor), "tangent");
  TangentVector v{x, std::move(data)};
  if (!(tangency_defect(v) <= tol))
    throw DomainError("vector is not in the tangent space at the base point");
  return v;
}

double tangency_defect(const TangentVector& v) {
  const TangentVector p = tangent_project(v.base, v.data);
  return block_norm(subtract(p.data, v.data));
}

TangentVector scaled(const TangentVector& v, double factor) {
  return TangentVector{v.base, scale(v.data, factor)};
}

// ---- core operations -------------------------------------------------------

TangentVector tangent_project(const ManifoldPoint& x, const Blocks& ambient) {
  require_shapes(ambient, tangent_block_shapes(x.descriptor), "ambient");
  Blocks out(ambient.size());
  for (const auto& leaf : leaves(x.descriptor)) {
    const int po = leaf.point_off;
    const int to = leaf.tangent_off;
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere:
        out[to] = sphere_project(x.data[po], ambient[to]);
        break;
      case ManifoldDescriptor::Kind::Euclidean:
        out[to] = ambient[to];
        break;
      case ManifoldDescriptor::Kind::Stiefel:
        out[to] = stiefel_project(x.data[po], ambient[to]);
        break;
      case ManifoldDescriptor::Kind::FixedRank:
        out[to] = fixedrank_project(x.data[po], x.data[po + 2], ambient[to]);
        break;
      case ManifoldDescriptor::Kind::Product:
        break;
    }
  }
  return TangentVector{x, std::move(out)};
}

ManifoldPoint retract(const ManifoldPoint& x, const TangentVector& v) {
  if (!same_point(v.base, x)) throw DomainError("retract: tangent base differs from x");
  if (blocks_zero(v.data)) return x;  // R_x(0) = x, bitwise
  Blocks out(x.data.size());
  for (const auto& leaf : leaves(x.descriptor)) {
    const int po = leaf.point_off;
    const int to = leaf.tangent_off;
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere:
        out[po] = sphere_exp(x.data[po], v.data[to]);
        break;
      case ManifoldDescriptor::Kind::Euclidean:
        out[po] = x.data[po] + v.data[to];
        break;
      case ManifoldDescriptor::Kind::Stiefel:
        out[po] = stiefel_qf(x.data[po] + v.data[to]);
        break;
      case ManifoldDescriptor::Kind::FixedRank:
        fixedrank_retract(x.data[po], x.data[po + 1], x.data[po + 2], v.data[to],
                          out[po], out[po + 1], out[po + 2]);
        break;
      case ManifoldDescriptor::Kind::Product:
        break;
    }
  }
  return ManifoldPoint{x.descriptor, std::move(out)};
}

ManifoldPoint exp_map(const ManifoldPoint& x, const TangentVector& v) {
  if (!same_point(v.base, x)) throw DomainError("exp_map: tangent base differs from x");
  if (!has_exp_map(x.descriptor))
    throw CapabilityError("no closed-form exponential map on " +
                          x.descriptor.to_string() + "; use retract");
  if (blocks_zero(v.data)) return x;
  Blocks out(x.data.size());
  for (const auto& leaf : leaves(x.descriptor)) {
    const int po = leaf.point_off;
    const int to = leaf.tangent_off;
    if (leaf.desc->kind() == ManifoldDescriptor::Kind::Sphere)
      out[po] = sphere_exp(x.data[po], v.data[to]);
    else
      out[po] = x.data[po] + v.data[to];
  }
  return ManifoldPoint{x.descriptor, std::move(out)};
}

double inner(const ManifoldPoint& x, const TangentVector& u, const TangentVector& v) {
  if (!same_point(u.base, x) || !same_point(v.base, x))
    throw DomainError("inner: tangent bases differ from x");
  return dot(u.data, v.data);
}

double norm(const TangentVector& v) { return block_norm(v.data); }

TangentVector transport(const ManifoldPoint& x, const ManifoldPoint& y,
                        const TangentVector& v) {
  if (x.descriptor != y.descriptor)
    throw DomainError("transport: points live on different manifolds");
  if (!same_point(v.base, x)) throw DomainError("transport: tangent base differs from x");
  if (same_point(x, y)) return v;
  Blocks out(v.data.size());
  for (const auto& leaf : leaves(x.descriptor)) {
    const int po = leaf.point_off;
    const int to = leaf.tangent_off;
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere:
        out[to] = sphere_transport(x.data[po], y.data[po], v.data[to]);
        break;
      case ManifoldDescriptor::Kind::Euclidean:
        out[to] = v.data[to];
        break;
      case ManifoldDescriptor::Kind::Stiefel:
        out[to] = stiefel_project(y.data[po], v.data[to]);
        break;
      case ManifoldDescriptor::Kind::FixedRank:
        out[to] = fixedrank_project(y.data[po], y.data[po + 2], v.data[to]);
        break;
      case ManifoldDescriptor::Kind::Product:
        break;
    }
  }
  return TangentVector{y, std::move(out)};
}

double dist(const ManifoldPoint& x, const ManifoldPoint& y) {
  if (x.descriptor != y.descriptor)
    throw DomainError("dist: points live on different manifolds");
  double sq = 0.0;
  for (const auto& leaf : leaves(x.descriptor)) {
    const int po = leaf.point_off;
    double d = 0.0;
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere:
        d = sphere_dist(x.data[po], y.data[po]);
        break;
      case ManifoldDescriptor::Kind::Euclidean:
      case ManifoldDescriptor::Kind::Stiefel:
        d = (x.data[po] - y.data[po]).norm();
        break;
      case ManifoldDescriptor::Kind::FixedRank:
        d = (fixedrank_dense(x.data[po], x.data[po + 1], x.data[po + 2]) -
             fixedrank_dense(y.data[po], y.data[po + 1], y.data[po + 2]))
                .norm();
        break;
      case ManifoldDescriptor::Kind::Product:
        break;
    }
    sq += d * d;
  }
  return std::sqrt(sq);
}

ManifoldPoint random_point(const ManifoldDescriptor& d, CounterRng& rng) {
  Blocks data(point_block_count(d));
  for (const auto& leaf : leaves(d)) {
    const int po = leaf.point_off;
    const auto& dims = leaf.desc->dims();
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere: {
        Matrix g;
        do {
          g = rng.normal_matrix(dims[0], 1);
        } while (g.norm() < 1e-12);
        data[po] = g / g.norm();
        break;
      }
      case ManifoldDescriptor::Kind::Euclidean:
        data[po] = rng.normal_matrix(dims[0], 1);
        break;
      case ManifoldDescriptor::Kind::Stiefel:
        data[po] = stiefel_qf(rng.normal_matrix(dims[0], dims[1]));
        break;
      case ManifoldDescriptor::Kind::FixedRank: {
        const Index p = dims[2];
        data[po] = stiefel_qf(rng.normal_matrix(dims[0], p));
        Vector s(p);
        for (Index i = 0; i < p; ++i)
          s(i) = (0.5 + rng.u01()) / std::sqrt(static_cast<double>(p));
        std::sort(s.data(), s.data() + p, std::greater<double>());
        data[po + 1] = s;
        data[po + 2] = stiefel_qf(rng.normal_matrix(dims[1], p));
        break;
      }
      case ManifoldDescriptor::Kind::Product:
        break;
    }
  }
  return ManifoldPoint{d, std::move(data)};
}

TangentVector random_tangent(const ManifoldPoint& x, CounterRng& rng, double norm) {
  if (norm < 0.0) throw DomainError("random_tangent: norm must be nonnegative");
  if (norm == 0.0) return zero_tangent(x);
  const auto shapes = tangent_block_shapes(x.descriptor);
  for (int attempt = 0; attempt < 64; ++attempt) {
    Blocks g;
    g.reserve(shapes.size());
    for (const auto& [r, c] : shapes) g.push_back(rng.normal_matrix(r, c));
    TangentVector v = tangent_project(x, g);
    const double n = block_norm(v.data);
    if (n > 1e-12) return scaled(v, norm / n);
  }
  throw NumericError("random_tangent: projection kept collapsing to zero");
}

ManifoldPoint renormalize(const ManifoldPoint& x) {
  Blocks out(x.data.size());
  for (const auto& leaf : leaves(x.descriptor)) {
    const int po = leaf.point_off;
    switch (leaf.desc->kind()) {
      case ManifoldDescriptor::Kind::Sphere:
        out[po] = x.data[po] / x.data[po].norm();
        break;
      case ManifoldDescriptor::Kind::Euclidean:
        out[po] = x.data[po];
        break;
      case ManifoldDescriptor::Kind::Stiefel:
        out[po] = stiefel_qf(x.data[po]);
        break;
      case ManifoldDescriptor::Kind::FixedRank:
        fixedrank_renormalize(x.data[po], x.data[po + 1], x.data[po + 2],
                              out[po], out[po + 1], out[po + 2]);
        break;
      case ManifoldDescriptor::Kind::Product:
        break;
    }
  }
  return ManifoldPoint{x.descriptor, std::move(out)};
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& defects,
                        double noise_floor) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [h, d] : defects)
    if (d > noise_floor) pts.push_back({std::log(h), std::log(d)});
  if (pts.size() < 2) return std::numeric_limits<double>::infinity();
  double mx = 0, my = 0;
  for (const auto& [lx, ly] : pts) {
    mx += lx;
    my += ly;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double num = 0, den = 0;
  for (const auto& [lx, ly] : pts) {
    num += (lx - mx) * (ly - my);
    den += (lx - mx) * (lx - mx);
  }
  return num / den;
}

}  // namespace rsgd
