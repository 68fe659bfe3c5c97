#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rsgd/geometry.hpp"

using namespace rsgd;

namespace {

constexpr double kPi = 3.14159265358979323846;

ManifoldPoint sphere_point(std::initializer_list<double> coords) {
  Vector v(static_cast<Index>(coords.size()));
  Index i = 0;
  for (double c : coords) v(i++) = c;
  return make_point(ManifoldDescriptor::sphere(v.size()), {v});
}

std::vector<ManifoldDescriptor> test_manifolds() {
  return {
      ManifoldDescriptor::sphere(3),
      ManifoldDescriptor::sphere(10),
      ManifoldDescriptor::stiefel(4, 2),
      ManifoldDescriptor::stiefel(10, 3),
      ManifoldDescriptor::fixed_rank(6, 5, 2),
      ManifoldDescriptor::fixed_rank(20, 20, 3),
      ManifoldDescriptor::euclidean(4),
      ManifoldDescriptor::product({ManifoldDescriptor::sphere(3),
                                   ManifoldDescriptor::stiefel(4, 2),
                                   ManifoldDescriptor::euclidean(2)}),
  };
}

}  // namespace

TEST_CASE("descriptor invariants reject bad dimensions") {
  CHECK_THROWS_AS(ManifoldDescriptor::sphere(1), DimensionError);
  CHECK_THROWS_AS(ManifoldDescriptor::stiefel(3, 4), DimensionError);
  CHECK_THROWS_AS(ManifoldDescriptor::stiefel(3, 0), DimensionError);
  CHECK_THROWS_AS(ManifoldDescriptor::fixed_rank(3, 4, 4), DimensionError);
  CHECK_THROWS_AS(ManifoldDescriptor::product({}), DimensionError);
  CHECK(ManifoldDescriptor::stiefel(3, 3).kind() == ManifoldDescriptor::Kind::Stiefel);
}

TEST_CASE("counter rng is deterministic and well distributed") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(CounterRng::mix(1, 0) != CounterRng::mix(1, 1));
  CHECK(CounterRng::mix(1, 0) != CounterRng::mix(2, 0));

  CounterRng rng(7);
  double mean = 0, m2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    mean += x;
    m2 += x * x;
  }
  mean /= n;
  m2 /= n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));          // 4 standard errors
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / n));
  for (int i = 0; i < 1000; ++i) {
    const auto k = rng.uniform_index(13);
    CHECK(k >= 0);
    CHECK(k < 13);
  }
}

TEST_CASE("tangent projection removes the normal component on the sphere") {
  const ManifoldPoint x = sphere_point({1, 0, 0});
  Vector e1 = Vector::Zero(3), e2 = Vector::Zero(3);
  e1(0) = 1;
  e2(1) = 1;

  const TangentVector v1 = tangent_project(x, {e1});
  CHECK(v1.data[0].norm() == doctest::Approx(0.0).epsilon(1e-15));
  const TangentVector v2 = tangent_project(x, {e2});
  CHECK((v2.data[0] - e2).norm() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("stiefel tangent projection matches the explicit formula") {
  CounterRng rng(3);
  const auto d = ManifoldDescriptor::stiefel(3, 2);
  Matrix x0(3, 2);
  x0 << 1, 0, 0, 1, 0, 0;
  const ManifoldPoint x = make_point(d, {x0});
  const Matrix g = rng.normal_matrix(3, 2);

  // oracle: g - x * sym(x^T g)
  const Matrix xtg = x0.transpose() * g;
  const Matrix expected = g - x0 * (0.5 * (xtg + xtg.transpose()));
  const TangentVector r = tangent_project(x, {g});
  CHECK((r.data[0] - expected).norm() <= 1e-12);

  // tangent-space defining equation: x^T r + r^T x = 0
  const Matrix skew = x0.transpose() * r.data[0] + r.data[0].transpose() * x0;
  CHECK(skew.norm() <= 1e-12);

  // idempotent
  const TangentVector rr = tangent_project(x, r.data);
  CHECK((rr.data[0] - r.data[0]).norm() <= 1e-12);
}

TEST_CASE("tangent projection is idempotent, linear and self-adjoint") {
  for (const auto& d : test_manifolds()) {
    CAPTURE(d.to_string());
    CounterRng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      const ManifoldPoint x = random_point(d, rng);
      Blocks g1, g2;
      for (const auto& [r, c] : tangent_block_shapes(d)) {
        g1.push_back(rng.normal_matrix(r, c));
        g2.push_back(rng.normal_matrix(r, c));
      }
      const TangentVector p1 = tangent_project(x, g1);
      const TangentVector p2 = tangent_project(x, g2);

      // idempotent
      CHECK(tangency_defect(p1) <= 1e-10);
      // linear: P(a g1 + b g2) = a P(g1) + b P(g2)
      const TangentVector lin = tangent_project(x, add(scale(g1, 0.7), scale(g2, -1.3)));
      const Blocks expect = add(scale(p1.data, 0.7), scale(p2.data, -1.3));
      CHECK(block_norm(subtract(lin.data, expect)) <= 1e-10);
      // self-adjoint: <P g1, g2> = <g1, P g2>
      CHECK(dot(p1.data, g2) == doctest::Approx(dot(g1, p2.data)).epsilon(1e-10));
    }
  }
}

TEST_CASE("retraction zero law is exact on every manifold") {
  for (const auto& d : test_manifolds()) {
    CAPTURE(d.to_string());
    CounterRng rng(5);
    const ManifoldPoint x = random_point(d, rng);
    const ManifoldPoint back = retract(x, zero_tangent(x));
    CHECK(same_point(back, x));  // bitwise
    if (has_exp_map(d)) CHECK(same_point(exp_map(x, zero_tangent(x)), x));
  }
}

TEST_CASE("sphere retraction follows great circles") {
  const ManifoldPoint x = sphere_point({1, 0});
  Vector v(2);
  v << 0, kPi / 2;
  const ManifoldPoint y = retract(x, make_tangent(x, {v}));
  CHECK(y.data[0](0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(y.data[0](1) == doctest::Approx(1.0).epsilon(1e-12));

  Vector w(2);
  w << 0, kPi;
  const ManifoldPoint anti = exp_map(x, make_tangent(x, {w}));
  CHECK(anti.data[0](0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("manifold membership is closed under retract, exp and random points") {
  for (const auto& d : test_manifolds()) {
    CAPTURE(d.to_string());
    CounterRng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
      const ManifoldPoint x = random_point(d, rng);
      CHECK(membership_defect(x) <= 1e-10);
      const TangentVector v = random_tangent(x, rng, 0.3);
      CHECK(membership_defect(retract(x, v)) <= 1e-10);
      if (has_exp_map(d)) CHECK(membership_defect(exp_map(x, v)) <= 1e-10);
    }
  }
}

TEST_CASE("stiefel QR retraction keeps orthonormal columns") {
  CounterRng rng(23);
  const auto d = ManifoldDescriptor::stiefel(3, 2);
  Matrix x0(3, 2);
  x0 << 1, 0, 0, 1, 0, 0;
  const ManifoldPoint x = make_point(d, {x0});
  const TangentVector v = random_tangent(x, rng, 0.1);
  const ManifoldPoint y = retract(x, v);
  const Matrix gram = y.data[0].transpose() * y.data[0];
  CHECK((gram - Matrix::Identity(2, 2)).norm() <= 1e-12);
}

TEST_CASE("retraction first-order law: defect shrinks quadratically") {
  // reference is the ambient line x + h v, which pins DR_x(0) = Id
  for (const auto& d : {ManifoldDescriptor::sphere(10),
                        ManifoldDescriptor::stiefel(10, 3),
                        ManifoldDescriptor::fixed_rank(20, 20, 3)}) {
    CAPTURE(d.to_string());
    CounterRng rng(29);
    for (int rep = 0; rep < 3; ++rep) {
      const ManifoldPoint x = random_point(d, rng);
      const TangentVector v = random_tangent(x, rng, 1.0);
      std::vector<std::pair<double, double>> defects;
      for (double h : {1e-2, 1e-3, 1e-4}) {
        const Blocks moved = ambient_coords(retract(x, scaled(v, h)));
        const Blocks ref = add(ambient_coords(x), scale(v.data, h));
        defects.push_back({h, block_norm(subtract(moved, ref))});
      }
      for (const auto& [h, defect] : defects) CHECK(defect >= 0.0);
      CHECK(fit_loglog_slope(defects) >= 1.9);
    }
  }
}

TEST_CASE("exp map exists only where there is a closed form") {
  CounterRng rng(31);
  const auto st = ManifoldDescriptor::stiefel(4, 2);
  const ManifoldPoint x = random_point(st, rng);
  CHECK_THROWS_AS(exp_map(x, zero_tangent(x)), CapabilityError);
  CHECK(!has_exp_map(st));
  CHECK(!has_exp_map(ManifoldDescriptor::fixed_rank(4, 4, 2)));
  CHECK(has_exp_map(ManifoldDescriptor::sphere(4)));
  CHECK(has_exp_map(ManifoldDescriptor::product(
      {ManifoldDescriptor::sphere(3), ManifoldDescriptor::euclidean(2)})));
}

TEST_CASE("sphere exp and dist are consistent") {
  CounterRng rng(37);
  const auto d = ManifoldDescriptor::sphere(3);
  for (int rep = 0; rep < 25; ++rep) {
    const ManifoldPoint x = random_point(d, rng);
    const double target = 0.3;
    const TangentVector v = random_tangent(x, rng, target);
    CHECK(dist(x, exp_map(x, v)) == doctest::Approx(target).epsilon(1e-10));
  }
  // dist(x, exp_x(v)) = min(|v|, 2 pi - |v|) up to |v| = pi
  const auto d4 = ManifoldDescriptor::sphere(4);
  for (double t : {0.5, 1.5, 2.5, 3.1, kPi}) {
    const ManifoldPoint x = random_point(d4, rng);
    const TangentVector v = random_tangent(x, rng, t);
    const double expected = std::min(t, 2 * kPi - t);
    CHECK(std::abs(dist(x, exp_map(x, v)) - expected) <= 1e-9);
  }
}

TEST_CASE("inner product is the Frobenius metric") {
  const ManifoldPoint x = sphere_point({1, 0});
  Vector u(2), v(2);
  u << 0, 2;
  v << 0, 3;
  CHECK(inner(x, make_tangent(x, {u}), make_tangent(x, {v})) == doctest::Approx(6.0));

  CounterRng rng(41);
  const auto st = ManifoldDescriptor::stiefel(4, 2);
  for (int rep = 0; rep < 10; ++rep) {
    const ManifoldPoint y = random_point(st, rng);
    const TangentVector a = random_tangent(y, rng, 1.7);
    const TangentVector b = random_tangent(y, rng, 0.9);
    CHECK(inner(y, a, b) ==
          doctest::Approx((a.data[0].transpose() * b.data[0]).trace()).epsilon(1e-12));
    CHECK(inner(y, a, a) >= 0.0);
    CHECK(norm(a) == doctest::Approx(1.7).epsilon(1e-12));
  }
  CHECK(norm(zero_tangent(x)) == 0.0);
}

TEST_CASE("transport on the sphere is exact parallel transport") {
  const ManifoldPoint x = sphere_point({1, 0});
  const ManifoldPoint y = sphere_point({0, 1});
  Vector v(2);
  v << 0, 1.25;
  const TangentVector moved = transport(x, y, make_tangent(x, {v}));
  CHECK(moved.data[0](0) == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(moved.data[0](1) == doctest::Approx(0.0).epsilon(1e-12));

  CounterRng rng(43);
  const auto d = ManifoldDescriptor::sphere(5);
  for (int rep = 0; rep < 20; ++rep) {
    const ManifoldPoint a = random_point(d, rng);
    const ManifoldPoint b = exp_map(a, random_tangent(a, rng, 0.8));
    const TangentVector t = random_tangent(a, rng, 2.0);
    const TangentVector tb = transport(a, b, t);
    CHECK(tangency_defect(tb) <= 1e-10);
    CHECK(norm(tb) == doctest::Approx(2.0).epsilon(1e-10));  // isometry
    CHECK(same_point(tb.base, b));
  }
}

TEST_CASE("transport with identical endpoints returns the vector unchanged") {
  CounterRng rng(47);
  for (const auto& d : test_manifolds()) {
    const ManifoldPoint x = random_point(d, rng);
    const TangentVector v = random_tangent(x, rng, 0.5);
    const TangentVector back = transport(x, x, v);
    CHECK(blocks_equal(back.data, v.data));
  }
}

TEST_CASE("transport on stiefel equals projection to the target tangent space") {
  CounterRng rng(53);
  const auto d = ManifoldDescriptor::stiefel(4, 2);
  const ManifoldPoint x = random_point(d, rng);
  const ManifoldPoint y = random_point(d, rng);
  const TangentVector v = random_tangent(x, rng, 1.0);
  const TangentVector moved = transport(x, y, v);
  const TangentVector oracle = tangent_project(y, v.data);
  CHECK(block_norm(subtract(moved.data, oracle.data)) == 0.0);
}

TEST_CASE("dist basics") {
  const ManifoldPoint x = sphere_point({1, 0});
  const ManifoldPoint y = sphere_point({0, 1});
  CHECK(dist(x, x) == 0.0);
  CHECK(dist(x, y) == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(dist(x, y) == doctest::Approx(dist(y, x)));

  CounterRng rng(59);
  const auto fr = ManifoldDescriptor::fixed_rank(6, 5, 2);
  const ManifoldPoint a = random_point(fr, rng);
  const ManifoldPoint b = random_point(fr, rng);
  CHECK(dist(a, b) == doctest::Approx((dense(a) - dense(b)).norm()).epsilon(1e-12));
  CHECK(dist_kind(fr) == "ambient_frobenius_surrogate");
  CHECK(dist_kind(ManifoldDescriptor::sphere(3)) == "geodesic");
}

TEST_CASE("random points satisfy invariants tightly") {
  CounterRng rng(61);
  for (int rep = 0; rep < 100; ++rep) {
    const ManifoldPoint x = random_point(ManifoldDescriptor::sphere(6), rng);
    CHECK(std::abs(x.data[0].norm() - 1.0) <= 1e-12);
  }
  const ManifoldPoint s = random_point(ManifoldDescriptor::stiefel(5, 3), rng);
  CHECK((s.data[0].transpose() * s.data[0] - Matrix::Identity(3, 3)).norm() <= 1e-12);

  const ManifoldPoint f = random_point(ManifoldDescriptor::fixed_rank(6, 4, 2), rng);
  CHECK(membership_defect(f) <= 1e-12);

  // requested-norm contract
  const TangentVector z = random_tangent(s, rng, 0.0);
  CHECK(blocks_zero(z.data));
  const TangentVector t = random_tangent(s, rng, 3.25);
  CHECK(norm(t) == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("product operations distribute componentwise") {
  CounterRng rng(67);
  const auto s3 = ManifoldDescriptor::sphere(3);
  const auto e2 = ManifoldDescriptor::euclidean(2);
  const auto prod = ManifoldDescriptor::product({s3, e2});

  const ManifoldPoint xp = random_point(prod, rng);
  const ManifoldPoint xs = ManifoldPoint{s3, {xp.data[0]}};
  const ManifoldPoint xe = ManifoldPoint{e2, {xp.data[1]}};

  Blocks g = {rng.normal_matrix(3, 1), rng.normal_matrix(2, 1)};
  const TangentVector pp = tangent_project(xp, g);
  const TangentVector ps = tangent_project(xs, {g[0]});
  const TangentVector pe = tangent_project(xe, {g[1]});
  CHECK((pp.data[0] - ps.data[0]).norm() == 0.0);
  CHECK((pp.data[1] - pe.data[0]).norm() == 0.0);

  // inner is the sum of component inners (brute-force concatenation oracle)
  Blocks h = {rng.normal_matrix(3, 1), rng.normal_matrix(2, 1)};
  const TangentVector qq = tangent_project(xp, h);
  double brute = 0.0;
  for (size_t b = 0; b < 2; ++b)
    brute += (pp.data[b].array() * qq.data[b].array()).sum();
  CHECK(inner(xp, pp, qq) == doctest::Approx(brute).epsilon(1e-12));

  // retraction distributes
  const ManifoldPoint rp = retract(xp, pp);
  const ManifoldPoint rs = retract(xs, ps);
  CHECK((rp.data[0] - rs.data[0]).norm() <= 1e-15);

  // dist combines componentwise in quadrature
  const ManifoldPoint yp = random_point(prod, rng);
  const double ds = dist(xs, ManifoldPoint{s3, {yp.data[0]}});
  const double de = dist(xe, ManifoldPoint{e2, {yp.data[1]}});
  CHECK(dist(xp, yp) == doctest::Approx(std::sqrt(ds * ds + de * de)).epsilon(1e-12));
}

TEST_CASE("renormalize repairs drifting representations") {
  CounterRng rng(71);
  const auto d = ManifoldDescriptor::stiefel(6, 2);
  ManifoldPoint x = random_point(d, rng);
  x.data[0] *= 1.0 + 1e-7;  // inject drift
  CHECK(membership_defect(x) > 1e-8);
  const ManifoldPoint fixed = renormalize(x);
  CHECK(membership_defect(fixed) <= 1e-12);

  ManifoldPoint f = random_point(ManifoldDescriptor::fixed_rank(5, 4, 2), rng);
  f.data[0].col(0) *= 1.0 + 1e-7;
  const ManifoldPoint ffixed = renormalize(f);
  CHECK(membership_defect(ffixed) <= 1e-12);
  CHECK((dense(ffixed) - dense(f)).norm() <= 1e-6);
}

TEST_CASE("error paths: shape and base mismatches") {
  CounterRng rng(73);
  const ManifoldPoint x = random_point(ManifoldDescriptor::sphere(3), rng);
  const ManifoldPoint y = random_point(ManifoldDescriptor::sphere(3), rng);
  CHECK_THROWS_AS(tangent_project(x, {rng.normal_matrix(4, 1)}), DimensionError);
  const TangentVector v = random_tangent(x, rng, 1.0);
  CHECK_THROWS_AS(retract(y, v), DomainError);
  CHECK_THROWS_AS(inner(y, v, v), DomainError);
  const ManifoldPoint z = random_point(ManifoldDescriptor::sphere(4), rng);
  CHECK_THROWS_AS(dist(x, z), DomainError);
  CHECK_THROWS_AS(make_point(ManifoldDescriptor::sphere(3),
                             {Vector::Constant(3, 2.0)}),
                  DomainError);
  CHECK_THROWS_AS(random_tangent(x, rng, -1.0), DomainError);
}

TEST_CASE("fixed-rank retraction errors on rank collapse") {
  // rank-1 1x1-style degenerate move: X + Z with Z = -X kills the
  // singular value
  const auto d = ManifoldDescriptor::fixed_rank(2, 2, 1);
  Matrix u(2, 1), s(1, 1), v(2, 1);
  u << 1, 0;
  s << 1;
  v << 1, 0;
  const ManifoldPoint x = make_point(d, {u, s, v});
  const Matrix z = -dense(x);
  const TangentVector t = tangent_project(x, {z});
  CHECK_THROWS_AS(retract(x, t), RankDeficiencyError);
}
