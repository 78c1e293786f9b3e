#include <doctest.h>

#include <cmath>
#include <random>

#include "kpeval/geometry.hpp"
#include "oracles.hpp"

using namespace kpeval;

namespace {

Homography make_h(double a00, double a01, double a02, double a10, double a11, double a12,
                  double a20, double a21, double a22) {
  Mat3 m;
  m << a00, a01, a02, a10, a11, a12, a20, a21, a22;
  return Homography(m);
}

Mat2 rotation(double theta) {
  return Eigen::Rotation2Dd(theta).toRotationMatrix();
}

}  // namespace

TEST_CASE("local affine approximation") {
  SUBCASE("identity homography gives the identity Jacobian") {
    const Mat2 jac = local_affine_approx(Homography(), Vec2(3.0, -7.0));
    CHECK(jac.isApprox(Mat2::Identity(), 1e-14));
  }

  SUBCASE("affine homography gives its linear part everywhere") {
    const Homography h = make_h(2.0, 0.5, 10.0, -0.25, 1.5, -3.0, 0.0, 0.0, 1.0);
    Mat2 linear;
    linear << 2.0, 0.5, -0.25, 1.5;
    CHECK(local_affine_approx(h, Vec2(0.0, 0.0)).isApprox(linear, 1e-14));
    CHECK(local_affine_approx(h, Vec2(123.0, -45.0)).isApprox(linear, 1e-14));
  }

  SUBCASE("projective homography matches the finite-difference oracle") {
    const Homography h = make_h(1.1, 0.2, 5.0, -0.1, 0.9, 2.0, 1e-3, -2e-3, 1.0);
    const Vec2 x(10.0, 20.0);
    const Mat2 jac = local_affine_approx(h, x);
    const Eigen::Matrix2d expected = oracles::fd_jacobian(h.matrix, x);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        CHECK(std::abs(jac(r, c) - expected(r, c)) <= 1e-6);
      }
    }
  }

  SUBCASE("degenerate projective denominator throws") {
    const Homography h = make_h(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -0.01, 1.0);
    // w = 1 - 0.01 y vanishes at y = 100
    CHECK_THROWS_AS(local_affine_approx(h, Vec2(0.0, 100.0)), DegenerateProjection);
    CHECK_THROWS_AS(project_point(h, Vec2(0.0, 100.0)), DegenerateProjection);
  }
}

TEST_CASE("region reprojection") {
  const EllipticalRegion region(Vec2(4.0, -2.0), [] {
    Mat2 s;
    s << 9.0, 2.0, 2.0, 5.0;
    return s;
  }());

  SUBCASE("identity leaves the region unchanged") {
    const EllipticalRegion out = reproject_region(region, Homography());
    CHECK(out.center.isApprox(region.center, 1e-14));
    CHECK(out.shape.isApprox(region.shape, 1e-14));
  }

  SUBCASE("uniform scale maps center and radii by the same factor") {
    const double s = 2.5;
    const Homography h = make_h(s, 0, 0, 0, s, 0, 0, 0, 1);
    const EllipticalRegion out = reproject_region(region, h);
    CHECK(out.center.isApprox(Vec2(s * region.center), 1e-12));
    const auto [small_in, large_in] = ellipse_radii(region);
    const auto [small_out, large_out] = ellipse_radii(out);
    CHECK(small_out == doctest::Approx(s * small_in).epsilon(1e-12));
    CHECK(large_out == doctest::Approx(s * large_in).epsilon(1e-12));
  }

  SUBCASE("pure rotation preserves radii and rotates the axes") {
    const double theta = 0.7;
    const Mat2 rot = rotation(theta);
    const Homography h = make_h(rot(0, 0), rot(0, 1), 0, rot(1, 0), rot(1, 1), 0, 0, 0, 1);
    const EllipticalRegion disk(Vec2(1.0, 2.0), Mat2(rotation(0.0) *
                                                     Eigen::Vector2d(4.0, 9.0).asDiagonal() *
                                                     rotation(0.0).transpose()));
    const EllipticalRegion out = reproject_region(disk, h);

    Eigen::SelfAdjointEigenSolver<Mat2> in_eig(disk.shape), out_eig(out.shape);
    CHECK(out_eig.eigenvalues()(0) == doctest::Approx(in_eig.eigenvalues()(0)).epsilon(1e-12));
    CHECK(out_eig.eigenvalues()(1) == doctest::Approx(in_eig.eigenvalues()(1)).epsilon(1e-12));
    // the minor axis of diag(4, 9) is e_x; it must land on rot * e_x
    const Vec2 axis_out = out_eig.eigenvectors().col(0);
    const Vec2 expected = rot * in_eig.eigenvectors().col(0);
    CHECK(std::abs(axis_out.dot(expected)) == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("H then H^-1 is the identity on well-conditioned input") {
    const Homography h = make_h(1.2, 0.1, 4.0, -0.2, 0.95, -1.0, 5e-4, 1e-4, 1.0);
    const EllipticalRegion there = reproject_region(region, h);
    const EllipticalRegion back = reproject_region(there, h.inverse());
    CHECK((back.center - region.center).norm() < 1e-6);
    CHECK((back.shape - region.shape).norm() / region.shape.norm() < 1e-6);
  }
}

TEST_CASE("ellipse radii") {
  SUBCASE("diagonal shape") {
    const auto [small, large] =
        ellipse_radii({Vec2::Zero(), Eigen::Vector2d(4.0, 9.0).asDiagonal()});
    CHECK(small == doctest::Approx(2.0));
    CHECK(large == doctest::Approx(3.0));
  }
  SUBCASE("circle") {
    const auto [small, large] = ellipse_radii(EllipticalRegion::disk(Vec2::Zero(), 7.5));
    CHECK(small == doctest::Approx(7.5));
    CHECK(large == doctest::Approx(7.5));
  }
  SUBCASE("rotation preserves the spectrum") {
    const Mat2 rot = rotation(0.7);
    const Mat2 shape = rot * Eigen::Vector2d(4.0, 9.0).asDiagonal() * rot.transpose();
    const auto [small, large] = ellipse_radii({Vec2::Zero(), shape});
    CHECK(small == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(large == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("non-positive-definite shape throws") {
    Mat2 bad;
    bad << 1.0, 0.0, 0.0, -2.0;
    CHECK_THROWS_AS(ellipse_radii({Vec2::Zero(), bad}), NonPositiveDefinite);
  }
}

TEST_CASE("region normalization") {
  SUBCASE("unit circle becomes a kappa circle") {
    const EllipticalRegion out =
        normalize_region(EllipticalRegion::disk(Vec2(3.0, 4.0), 1.0), 30.0);
    const auto [small, large] = ellipse_radii(out);
    CHECK(small == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(large == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(out.center.isApprox(Vec2(3.0, 4.0)));
  }

  SUBCASE("diag(4,9) scales to radii (2c, 3c) with c = 30/sqrt(6)") {
    const EllipticalRegion out =
        normalize_region({Vec2::Zero(), Eigen::Vector2d(4.0, 9.0).asDiagonal()}, 30.0);
    const double c = 30.0 / std::sqrt(6.0);
    const auto [small, large] = ellipse_radii(out);
    CHECK(small == doctest::Approx(2.0 * c).epsilon(1e-12));
    CHECK(large == doctest::Approx(3.0 * c).epsilon(1e-12));
    CHECK(std::sqrt(small * large) == doctest::Approx(30.0).epsilon(1e-12));
  }

  SUBCASE("idempotent and eccentricity-preserving") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.2, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
      const Mat2 rot = rotation(unit(rng));
      const double r1 = unit(rng), r2 = unit(rng);
      const EllipticalRegion region(
          Vec2(unit(rng), unit(rng)),
          Mat2(rot * Eigen::Vector2d(r1 * r1, r2 * r2).asDiagonal() * rot.transpose()));
      const EllipticalRegion once = normalize_region(region, 30.0);
      const EllipticalRegion twice = normalize_region(once, 30.0);
      CHECK((twice.shape - once.shape).norm() / once.shape.norm() < 1e-9);

      const auto [s_in, l_in] = ellipse_radii(region);
      const auto [s_out, l_out] = ellipse_radii(once);
      CHECK(l_out / s_out == doctest::Approx(l_in / s_in).epsilon(1e-9));
      CHECK(std::sqrt(s_out * l_out) == doctest::Approx(30.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("overlap error") {
  SUBCASE("identical regions give exactly zero") {
    Mat2 shape;
    shape << 25.0, 5.0, 5.0, 16.0;
    const EllipticalRegion region(Vec2(10.0, 12.0), shape);
    CHECK(overlap_error(region, region) == 0.0);
  }

  SUBCASE("far disks give exactly one") {
    const auto a = EllipticalRegion::disk(Vec2(0.0, 0.0), 3.0);
    const auto b = EllipticalRegion::disk(Vec2(100.0, 0.0), 3.0);
    CHECK(overlap_error(a, b) == 1.0);
  }

  SUBCASE("disks of radius 30 at distance 12 match the analytic value") {
    const auto a = EllipticalRegion::disk(Vec2(0.0, 0.0), 30.0);
    const auto b = EllipticalRegion::disk(Vec2(12.0, 0.0), 30.0);
    const double expected = oracles::disk_overlap_error(30.0, 12.0);
    CHECK(std::abs(expected - 0.4037) <= 5e-4);
    CHECK(std::abs(overlap_error(a, b) - expected) <= 2e-3);
  }

  SUBCASE("symmetric in its arguments, exactly") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      const Mat2 rot_a = rotation(2.0 * M_PI * unit(rng));
      const Mat2 rot_b = rotation(2.0 * M_PI * unit(rng));
      const double ra = 1.0 + 4.0 * unit(rng), rb = 1.0 + 4.0 * unit(rng);
      const EllipticalRegion a(
          Vec2(unit(rng), unit(rng)),
          Mat2(rot_a * Eigen::Vector2d(ra * ra, 4.0 * ra * ra).asDiagonal() * rot_a.transpose()));
      const EllipticalRegion b(
          Vec2(3.0 * unit(rng), 3.0 * unit(rng)),
          Mat2(rot_b * Eigen::Vector2d(rb * rb, 2.0 * rb * rb).asDiagonal() * rot_b.transpose()));
      CHECK(overlap_error(a, b) == overlap_error(b, a));
    }
  }

  SUBCASE("scale invariance of the common-frame raster") {
    const auto a = EllipticalRegion::disk(Vec2(5.0, 5.0), 2.0);
    const auto b = EllipticalRegion::disk(Vec2(6.5, 5.0), 3.0);
    const double base = overlap_error(a, b);
    for (double s : {0.1, 10.0, 250.0}) {
      const EllipticalRegion sa(s * a.center, Mat2(s * s * a.shape));
      const EllipticalRegion sb(s * b.center, Mat2(s * s * b.shape));
      CHECK(std::abs(overlap_error(sa, sb) - base) <= 4e-3);
    }
  }

  SUBCASE("raster agrees with the disk oracle across separations") {
    for (double t = 0.0; t <= 2.2 + 1e-9; t += 0.2) {
      const double radius = 5.0;
      const auto a = EllipticalRegion::disk(Vec2(0.0, 0.0), radius);
      const auto b = EllipticalRegion::disk(Vec2(t * radius, 0.0), radius);
      CHECK(std::abs(overlap_error(a, b) -
                     oracles::disk_overlap_error(radius, t * radius)) <= 2e-3);
    }
  }

  SUBCASE("a region collapsing below the raster resolution throws") {
    const auto a = EllipticalRegion::disk(Vec2(0.0, 0.0), 1000.0);
    const auto b = EllipticalRegion::disk(Vec2(0.0, 0.0), 0.001);
    CHECK_THROWS_AS(overlap_error(a, b), ZeroArea);
  }
}

TEST_CASE("repetition criterion variants") {
  CriterionConfig cfg;  // original, epsilon 0.40, kappa 30

  SUBCASE("identical regions repeat under every variant") {
    const auto region = EllipticalRegion::disk(Vec2(50.0, 50.0), 4.0);
    for (auto variant : {CriterionVariant::Original, CriterionVariant::Normalized,
                         CriterionVariant::CodeVariant}) {
      cfg.variant = variant;
      const RepeatDecision decision = is_repeated(region, region, Homography(), cfg);
      CHECK(decision.repeated);
      CHECK(decision.overlap == 0.0);
    }
  }

  SUBCASE("far-apart disks never repeat") {
    const auto a = EllipticalRegion::disk(Vec2(0.0, 0.0), 2.0);
    const auto b = EllipticalRegion::disk(Vec2(500.0, 0.0), 2.0);
    for (auto variant : {CriterionVariant::Original, CriterionVariant::Normalized,
                         CriterionVariant::CodeVariant}) {
      cfg.variant = variant;
      CHECK_FALSE(is_repeated(a, b, Homography(), cfg).repeated);
    }
  }

  SUBCASE("radius-1 disks 12 px apart sit just above the default tolerance") {
    // After normalization to kappa = 30 the overlap error is ~0.4037, a
    // boundary case for epsilon = 0.40.
    cfg.variant = CriterionVariant::Normalized;
    const auto a = EllipticalRegion::disk(Vec2(0.0, 0.0), 1.0);
    const auto b = EllipticalRegion::disk(Vec2(12.0, 0.0), 1.0);
    const RepeatDecision decision = is_repeated(a, b, Homography(), cfg);
    CHECK(std::abs(decision.overlap - 0.4037) <= 2e-3);
    CHECK(decision.repeated == (decision.overlap <= 0.40));
  }

  SUBCASE("code variant adds the center-distance gate") {
    // radius-1 disks 5 px apart: normalized overlap passes easily
    // (5 px vs d_max ~ 11.9 at kappa 30) but the gate 4*sqrt(rR) = 4 px fails.
    cfg.variant = CriterionVariant::Normalized;
    const auto a = EllipticalRegion::disk(Vec2(0.0, 0.0), 1.0);
    const auto b = EllipticalRegion::disk(Vec2(5.0, 0.0), 1.0);
    CHECK(is_repeated(a, b, Homography(), cfg).repeated);
    cfg.variant = CriterionVariant::CodeVariant;
    CHECK_FALSE(is_repeated(a, b, Homography(), cfg).repeated);
  }
}

TEST_CASE("maximum tolerated distance curves") {
  CriterionConfig cfg;

  SUBCASE("original variant is scale invariant") {
    cfg.variant = CriterionVariant::Original;
    const double d1 = max_distance_curve(4.0, cfg);
    const double d2 = max_distance_curve(8.0, cfg);
    CHECK(std::abs(d2 / d1 - 2.0) <= 1e-2);
  }

  SUBCASE("normalized variant does not depend on the radius") {
    cfg.variant = CriterionVariant::Normalized;
    const double d1 = max_distance_curve(1.0, cfg);
    const double d2 = max_distance_curve(50.0, cfg);
    CHECK(std::abs(d1 - d2) <= 1e-2);
    // the analytic location of the 0.40 error for kappa-30 disks
    CHECK(std::abs(d1 - oracles::disk_distance_for_error(30.0, 0.40)) <= 2e-2);
  }

  SUBCASE("vanishing tolerance forces coincidence") {
    cfg.variant = CriterionVariant::Original;
    cfg.epsilon_overlap = 1e-4;
    CHECK(max_distance_curve(30.0, cfg) < 0.05);
  }
}
