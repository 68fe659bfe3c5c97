#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rsgd/io.hpp"
#include "rsgd/theory_checks.hpp"

using namespace rsgd;

namespace {

ObjectivePtr smooth_pca(Index n, Index p, std::uint64_t seed) {
  return std::make_shared<SparsePca>(
      normalize_spectral(gaussian_matrix(n, n, seed)), 0.0, p);
}

ObjectivePtr constant_objective(const ManifoldDescriptor& d) {
  return std::make_shared<FunctionObjective>(
      d, [](const ManifoldPoint&) { return 4.2; },
      [](const ManifoldPoint& x) { return zeros_like(ambient_coords(x)); },
      "constant");
}

// f(x) = <c, x> restricted to the sphere; the Riemannian gradient field has
// curvature bounded by |c|
ObjectivePtr linear_sphere_objective(const Vector& c) {
  const auto d = ManifoldDescriptor::sphere(c.size());
  return std::make_shared<FunctionObjective>(
      d, [c](const ManifoldPoint& x) { return c.dot(x.data[0].col(0)); },
      [c](const ManifoldPoint&) { return Blocks{c}; }, "linear_sphere");
}

// rotational vector field around the z axis: not a gradient field, so loop
// integrals around the axis cannot vanish
ObjectivePtr rotation_field_objective() {
  const auto d = ManifoldDescriptor::sphere(3);
  return std::make_shared<FunctionObjective>(
      d, [](const ManifoldPoint&) { return 0.0; },
      [](const ManifoldPoint& x) {
        Vector g(3);
        g << -x.data[0](1), x.data[0](0), 0.0;
        return Blocks{g};
      },
      "rotation_field");
}

ManifoldPoint positive_orthant_point(Index n, std::uint64_t seed) {
  Matrix v = gaussian_matrix(n, 1, seed).cwiseAbs() + Matrix::Constant(n, 1, 0.6);
  v /= v.norm();
  return make_point(ManifoldDescriptor::sphere(n), {v});
}

}  // namespace

TEST_CASE("curve machinery: geodesics and segment interpolation") {
  CounterRng rng(1);
  const auto d = ManifoldDescriptor::sphere(4);
  const ManifoldPoint x = random_point(d, rng);
  const TangentVector v = random_tangent(x, rng, 0.7);
  const CurveSpec curve = CurveSpec::geodesic(x, v, 16);

  CHECK(same_point(curve_point(curve, 0.0), x));
  CHECK(dist(x, curve_point(curve, 1.0)) == doctest::Approx(0.7).epsilon(1e-9));

  // analytic velocity against centered differences of the curve itself
  for (double t : {0.2, 0.5, 0.8}) {
    const TangentVector vel = curve_velocity(curve, t);
    const double h = 1e-6;
    const Blocks fd = scale(subtract(ambient_coords(curve_point(curve, t + h)),
                                     ambient_coords(curve_point(curve, t - h))),
                            1.0 / (2 * h));
    CHECK(block_norm(subtract(vel.data, fd)) <= 1e-8);
    CHECK(norm(vel) == doctest::Approx(0.7).epsilon(1e-9));  // constant speed
  }

  // piecewise curve hits its vertices
  const ManifoldPoint y = random_point(d, rng);
  const CurveSpec pw = CurveSpec::piecewise({x, y}, 16);
  CHECK(same_point(curve_point(pw, 0.0), x));
  CHECK(same_point(curve_point(pw, 1.0), y));
  CHECK(curve_length(pw) == doctest::Approx(dist(x, y)).epsilon(1e-6));

  CHECK_THROWS_AS(CurveSpec::piecewise({x}, 16), DomainError);
  CHECK_THROWS_AS(CurveSpec::piecewise({x, y}, 4), DomainError);
}

TEST_CASE("stiefel retraction curves pass through qf interpolation") {
  CounterRng rng(3);
  const auto d = ManifoldDescriptor::stiefel(5, 2);
  const ManifoldPoint a = random_point(d, rng);
  const ManifoldPoint b = retract(a, random_tangent(a, rng, 0.5));
  const CurveSpec pw = CurveSpec::piecewise({a, b}, 16);
  for (double t : {0.25, 0.5, 0.75})
    CHECK(membership_defect(curve_point(pw, t)) <= 1e-12);
  const TangentVector vel = curve_velocity(pw, 0.5);
  CHECK(tangency_defect(vel) <= 1e-8);
  CHECK(norm(vel) > 0.0);
}

TEST_CASE("retraction axioms hold on the three core manifolds") {
  for (const auto& d : {ManifoldDescriptor::sphere(10),
                        ManifoldDescriptor::stiefel(10, 3),
                        ManifoldDescriptor::fixed_rank(20, 20, 3)}) {
    CAPTURE(d.to_string());
    CounterRng rng(5);
    const CheckReport report = check_retraction_axioms(d, 4, 3, rng);
    CHECK(report.pass);
    CHECK(report.metrics.at("zero_law_max_defect") == 0.0);
    CHECK(report.metrics.at("min_slope") >= 1.9);
  }
}

TEST_CASE("negative control: scaled retraction fails the first-order law") {
  for (const auto& d :
       {ManifoldDescriptor::sphere(6), ManifoldDescriptor::stiefel(6, 2)}) {
    CAPTURE(d.to_string());
    CounterRng rng(7);
    const CheckReport report =
        check_retraction_axioms(d, 3, 2, rng, scaled_retraction(1.1));
    CHECK(!report.pass);
    CHECK(report.metrics.at("min_slope") < 1.9);
  }
}

TEST_CASE("chain rule holds along retraction curves of a smooth objective") {
  auto obj = smooth_pca(8, 2, 11);
  CounterRng rng(13);
  const ManifoldPoint x = random_point(obj->descriptor(), rng);
  const TangentVector v = random_tangent(x, rng, 0.5);
  const CheckReport report = check_chain_rule(*obj, CurveSpec::geodesic(x, v, 64));
  CHECK(report.pass);
  CHECK(report.metrics.at("worst_node_defect") <= 1e-5);  // every node
  CHECK(report.metrics.at("failing_nodes") == 0.0);
}

TEST_CASE("chain rule for the l1 potential on an orthant-interior geodesic") {
  auto obj = make_l1_objective(ManifoldDescriptor::sphere(3));
  const ManifoldPoint x = positive_orthant_point(3, 17);
  CounterRng rng(19);
  const TangentVector v = random_tangent(x, rng, 0.2);
  const CurveSpec curve = CurveSpec::geodesic(x, v, 64);

  // the whole arc stays inside the positive orthant, where d/dt |gamma|_1
  // has the closed form <sign(gamma), dgamma/dt> = <1, dgamma/dt>
  for (double t : segment_aligned_nodes(curve, 64))
    REQUIRE(curve_point(curve, t).data[0].minCoeff() > 0.05);
  const CheckReport report = check_chain_rule(*obj, curve);
  CHECK(report.pass);
  CHECK(report.metrics.at("failing_nodes") == 0.0);

  // spot-check the analytic oracle at one node
  const double t0 = 0.5;
  const ManifoldPoint at = curve_point(curve, t0);
  const TangentVector vel = curve_velocity(curve, t0);
  const double analytic = vel.data[0].sum();  // sign pattern is all ones
  const double h = 1e-6;
  const double fd = (curve_point(curve, t0 + h).data[0].cwiseAbs().sum() -
                     curve_point(curve, t0 - h).data[0].cwiseAbs().sum()) /
                    (2 * h);
  CHECK(std::abs(fd - analytic) <= 1e-6);
  CHECK(std::abs(inner(at, tangent_project(at, obj->full_subgrad(at)), vel) -
                 analytic) <= 1e-12);
}

TEST_CASE("chain rule degenerate and error cases") {
  auto obj = constant_objective(ManifoldDescriptor::sphere(3));
  CounterRng rng(23);
  const ManifoldPoint x = random_point(obj->descriptor(), rng);
  const TangentVector v = random_tangent(x, rng, 0.4);

  // constant objective: both sides vanish at every node
  const CheckReport report = check_chain_rule(*obj, CurveSpec::geodesic(x, v, 32));
  CHECK(report.pass);
  CHECK(report.metrics.at("worst_node_defect") <= 1e-9);

  // zero-speed curve is rejected
  const CurveSpec still = CurveSpec::geodesic(x, zero_tangent(x), 32);
  CHECK_THROWS_AS(check_chain_rule(*obj, still), DomainError);

  // manifold mismatch is rejected
  auto other = constant_objective(ManifoldDescriptor::sphere(4));
  CHECK_THROWS_AS(check_chain_rule(*other, CurveSpec::geodesic(x, v, 32)),
                  DomainError);
}

TEST_CASE("negative control: flipped subgradient sign breaks the chain rule") {
  auto obj = flip_subgrad_sign(smooth_pca(8, 2, 29));
  CounterRng rng(31);
  const ManifoldPoint x = random_point(obj->descriptor(), rng);
  const TangentVector v = random_tangent(x, rng, 0.5);
  const CheckReport report = check_chain_rule(*obj, CurveSpec::geodesic(x, v, 64));
  CHECK(!report.pass);
  CHECK(report.metrics.at("failing_fraction") > 0.5);
}

TEST_CASE("loop integrals vanish for conservative fields") {
  // smooth sparse PCA over a random triangle on Stiefel(5,2)
  auto obj = smooth_pca(5, 2, 37);
  CounterRng rng(41);
  const CurveSpec triangle = random_loop(obj->descriptor(), 3, 0.4, 96, rng);
  const CheckReport report = check_loop_integral(*obj, triangle);
  CHECK(report.pass);
  CHECK(report.max_defect <= report.tolerance);

  // l1 on a sphere loop confined to one orthant (a smooth stratum)
  auto l1 = make_l1_objective(ManifoldDescriptor::sphere(3));
  const ManifoldPoint base = positive_orthant_point(3, 43);
  std::vector<ManifoldPoint> vertices;
  CounterRng vrng(47);
  for (int i = 0; i < 3; ++i)
    vertices.push_back(retract(base, random_tangent(base, vrng, 0.15)));
  for (const auto& p : vertices) REQUIRE(p.data[0].minCoeff() > 0.05);
  const CheckReport l1_report =
      check_loop_integral(*l1, CurveSpec::loop(vertices, 96));
  CHECK(l1_report.pass);
}

TEST_CASE("loop integral edge cases and negative control") {
  auto obj = smooth_pca(5, 2, 53);
  CounterRng rng(59);
  const ManifoldPoint x = random_point(obj->descriptor(), rng);

  // degenerate single-point loop integrates to exactly zero
  const CheckReport degen = check_loop_integral(*obj, CurveSpec::loop({x}, 16));
  CHECK(degen.pass);
  CHECK(degen.max_defect == 0.0);

  // open curves are rejected
  const ManifoldPoint y = retract(x, random_tangent(x, rng, 0.3));
  CHECK_THROWS_AS(check_loop_integral(*obj, CurveSpec::piecewise({x, y}, 16)),
                  DomainError);

  // a rotational (non-conservative) field must fail: equatorial loop
  auto rot = rotation_field_objective();
  std::vector<ManifoldPoint> equator;
  for (double angle : {0.0, 2.0, 4.0}) {
    Vector v(3);
    v << std::cos(angle), std::sin(angle), 0.0;
    equator.push_back(make_point(ManifoldDescriptor::sphere(3), {v}));
  }
  const CheckReport rot_report =
      check_loop_integral(*rot, CurveSpec::loop(equator, 96));
  CHECK(!rot_report.pass);
  CHECK(std::abs(rot_report.metrics.at("integral_extrapolated")) > 1.0);
}

TEST_CASE("loop quadrature converges at second order") {
  auto obj = smooth_pca(5, 2, 61);
  CounterRng rng(67);
  const CurveSpec coarse_loop = random_loop(obj->descriptor(), 3, 0.4, 16, rng);
  const CheckReport c16 = check_loop_integral(*obj, coarse_loop);
  // the check reports paired T and 2T estimates: since the true integral is
  // zero, their ratio is the quadrature convergence factor
  const double e_coarse = std::abs(c16.metrics.at("integral_coarse"));
  const double e_fine = std::abs(c16.metrics.at("integral_fine"));
  REQUIRE(e_fine > 1e-13);  // above the noise floor
  const double slope = std::log2(e_coarse / e_fine);
  CHECK(slope >= 1.8);
  CHECK(slope <= 2.2);
}

TEST_CASE("gradient-a.e. check on smooth and nonsmooth objectives") {
  CounterRng rng(71);
  auto smooth = smooth_pca(6, 2, 73);
  const CheckReport s = check_grad_ae(*smooth, 40, rng);
  CHECK(s.pass);
  CHECK(s.metrics.at("pass_fraction") == 1.0);  // differentiable everywhere

  auto completion = std::make_shared<MatrixCompletion>(
      normalized_rank_projected(gaussian_matrix(15, 15, 79), 3), 3, 0.0);
  const CheckReport c = check_grad_ae(*completion, 60, rng);
  CHECK(c.pass);
  CHECK(c.metrics.at("pass_fraction") >= 0.95);
}

TEST_CASE("a point placed exactly on a kink is flagged") {
  // residuals forced to zero: X reconstructs the ground truth, so every
  // direction crosses the kink of |.| at t = 0
  const Matrix truth = normalized_rank_projected(gaussian_matrix(6, 6, 83), 2);
  auto completion = std::make_shared<MatrixCompletion>(truth, 2, 0.0);
  Eigen::JacobiSVD<Matrix> svd(truth, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const ManifoldPoint at_kink = make_point(
      completion->descriptor(),
      {svd.matrixU().leftCols(2), Matrix(svd.singularValues().head(2)),
       svd.matrixV().leftCols(2)});
  CounterRng rng(89);
  const double defect = grad_consistency_defect(*completion, at_kink, 20, rng);
  CHECK(defect > 1e-4);  // an expected failure, visible in diagnostics

  // negative control: flipped sign fails even at generic points
  auto flipped = flip_subgrad_sign(completion);
  const CheckReport report = check_grad_ae(*flipped, 30, rng);
  CHECK(!report.pass);
}

TEST_CASE("lipschitz gradient ratios are reported, not thresholded") {
  CounterRng rng(97);
  auto constant = constant_objective(ManifoldDescriptor::sphere(4));
  const CheckReport zero = check_lipschitz_gradient(*constant, 0.1, 50, rng);
  CHECK(zero.pass);
  CHECK(zero.metrics.at("max_ratio") == 0.0);

  Vector c(4);
  c << 1.0, -2.0, 0.5, 0.25;
  auto linear = linear_sphere_objective(c);
  const CheckReport lin = check_lipschitz_gradient(*linear, 0.1, 100, rng);
  CHECK(lin.pass);
  // closed-form curvature bound: the projected field P_x(c) has differential
  // bounded by |c| on the unit sphere; transport adds curvature slack
  CHECK(lin.metrics.at("max_ratio") <= 1.5 * c.norm());
  CHECK(lin.metrics.at("median_ratio") <= lin.metrics.at("max_ratio"));

  auto pca = smooth_pca(8, 2, 101);
  const CheckReport p = check_lipschitz_gradient(*pca, 0.1, 100, rng);
  CHECK(p.pass);
  CHECK(std::isfinite(p.metrics.at("max_ratio")));
}

TEST_CASE("check reports satisfy their own pass invariant") {
  CounterRng rng(103);
  auto obj = smooth_pca(5, 2, 107);
  const std::vector<CheckReport> reports = {
      check_retraction_axioms(ManifoldDescriptor::sphere(5), 2, 2, rng),
      check_grad_ae(*obj, 10, rng),
      check_loop_integral(*obj, random_loop(obj->descriptor(), 3, 0.3, 32, rng)),
  };
  for (const auto& r : reports) {
    CAPTURE(r.name);
    CHECK(r.pass == (r.max_defect <= r.tolerance));
    CHECK(r.max_defect >= 0.0);
  }
}
