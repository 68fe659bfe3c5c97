#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rsgd/errors.hpp"
#include "rsgd/rng.hpp"

namespace rsgd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Ambient coordinates are lists of dense blocks. A point on a simple manifold
// owns one block (three for fixed-rank factors); a product point concatenates
// the blocks of its components. Tangent vectors and ambient (sub)gradients use
// one block per component; fixed-rank tangents are kept in full m x n ambient
// coordinates.
using Blocks = std::vector<Matrix>;

class ManifoldDescriptor {
 public:
  enum class Kind { Sphere, Stiefel, FixedRank, Euclidean, Product };

  // Unit vectors in R^n, n >= 2.
  static ManifoldDescriptor sphere(Index n);
  // n x p matrices with orthonormal columns, 1 <= p <= n.
  static ManifoldDescriptor stiefel(Index n, Index p);
  // m x n matrices of rank exactly p, stored as (U, s, V).
  static ManifoldDescriptor fixed_rank(Index m, Index n, Index p);
  // Plain R^n, used as the unconstrained block of product manifolds.
  static ManifoldDescriptor euclidean(Index n);
  static ManifoldDescriptor product(std::vector<ManifoldDescriptor> components);

  Kind kind() const { return kind_; }
  const std::vector<Index>& dims() const { return dims_; }
  const std::vector<ManifoldDescriptor>& components() const { return components_; }

  bool operator==(const ManifoldDescriptor& other) const;
  bool operator!=(const ManifoldDescriptor& other) const { return !(*this == other); }

  std::string to_string() const;

 private:
  ManifoldDescriptor() = default;
  Kind kind_ = Kind::Sphere;
  std::vector<Index> dims_;
  std::vector<ManifoldDescriptor> components_;
};

struct ManifoldPoint {
  ManifoldDescriptor descriptor;
  Blocks data;
};

struct TangentVector {
  ManifoldPoint base;
  Blocks data;
};

// Fitted log-log slope profile of a retraction defect, used by the
// first-order retraction checks.
struct GeometryReport {
  std::vector<std::pair<double, double>> defects;  // (h, defect)
  double fitted_slope = 0.0;
  double tolerance = 0.0;  // minimum admissible slope
  bool pass = false;
};

// ---- block helpers ---------------------------------------------------------

Blocks zeros_like(const Blocks& b);
bool blocks_zero(const Blocks& b);
bool blocks_equal(const Blocks& a, const Blocks& b);
bool blocks_finite(const Blocks& b);
Blocks add(const Blocks& a, const Blocks& b);
Blocks subtract(const Blocks& a, const Blocks& b);
Blocks scale(const Blocks& a, double factor);
double dot(const Blocks& a, const Blocks& b);
double block_norm(const Blocks& a);

// ---- descriptor queries ----------------------------------------------------

// Number of blocks in a point / tangent representation.
int point_block_count(const ManifoldDescriptor& d);
int tangent_block_count(const ManifoldDescriptor& d);
// Expected (rows, cols) of each block.
std::vector<std::pair<Index, Index>> point_block_shapes(const ManifoldDescriptor& d);
std::vector<std::pair<Index, Index>> tangent_block_shapes(const ManifoldDescriptor& d);
// Intrinsic dimension of the manifold.
Index manifold_dim(const ManifoldDescriptor& d);
// True when a closed-form exponential map exists (spheres, Euclidean blocks,
// and products thereof).
bool has_exp_map(const ManifoldDescriptor& d);
// "geodesic" where dist is exact, "ambient_frobenius_surrogate" otherwise.
std::string dist_kind(const ManifoldDescriptor& d);

// ---- points and tangents ---------------------------------------------------

// Validates shapes and membership (tolerance tol), then wraps the data.
ManifoldPoint make_point(const ManifoldDescriptor& d, Blocks data, double tol = 1e-8);
// Max constraint violation of the representation (0 for Euclidean).
double membership_defect(const ManifoldPoint& x);
void validate_point(const ManifoldPoint& x, double tol);
bool same_point(const ManifoldPoint& a, const ManifoldPoint& b);
// Dense ambient matrix of a non-product point (reconstructs U diag(s) V^T
// for fixed rank).
Matrix dense(const ManifoldPoint& x);
// Tangent-layout ambient coordinates of a point (fixed-rank components are
// densified), so points and tangents can be mixed linearly.
Blocks ambient_coords(const ManifoldPoint& x);

TangentVector zero_tangent(const ManifoldPoint& x);
TangentVector make_tangent(const ManifoldPoint& x, Blocks data, double tol = 1e-8);
// Distance of v.data from the tangent space at v.base.
double tangency_defect(const TangentVector& v);
TangentVector scaled(const TangentVector& v, double factor);

// ---- core operations -------------------------------------------------------

// Orthogonal projection of an ambient array onto T_x M.
TangentVector tangent_project(const ManifoldPoint& x, const Blocks& ambient);

// Sphere: exponential map. Stiefel: QR with positive-diagonal R.
// FixedRank: x + v re-truncated to rank p through a (2p) x (2p) core SVD.
// Euclidean: x + v. Products: componentwise. retract(x, 0) returns x bitwise.
ManifoldPoint retract(const ManifoldPoint& x, const TangentVector& v);

// Closed-form geodesic endpoint; CapabilityError when has_exp_map is false.
ManifoldPoint exp_map(const ManifoldPoint& x, const TangentVector& v);

// Embedded (Frobenius) metric.
double inner(const ManifoldPoint& x, const TangentVector& u, const TangentVector& v);
double norm(const TangentVector& v);

// Exact parallel transport along the minimal geodesic on spheres; projection
// transport everywhere else.
TangentVector transport(const ManifoldPoint& x, const ManifoldPoint& y,
                        const TangentVector& v);

// Exact geodesic distance on spheres; ambient Frobenius surrogate on Stiefel
// and fixed-rank (see dist_kind); componentwise l2 combination on products.
double dist(const ManifoldPoint& x, const ManifoldPoint& y);

ManifoldPoint random_point(const ManifoldDescriptor& d, CounterRng& rng);
// Tangent vector of exactly the requested norm (zero vector for norm 0).
TangentVector random_tangent(const ManifoldPoint& x, CounterRng& rng, double norm);

// Re-projects the stored representation onto the constraint set, countering
// floating-point drift over long runs.
ManifoldPoint renormalize(const ManifoldPoint& x);

// Least-squares slope of log(defect) against log(h); pairs with defect below
// the noise floor are dropped. Returns +inf when everything is at noise level.
double fit_loglog_slope(const std::vector<std::pair<double, double>>& defects,
                        double noise_floor = 1e-13);

}  // namespace rsgd
