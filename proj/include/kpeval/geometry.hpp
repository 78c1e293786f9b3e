#pragma once

#include <utility>

#include <Eigen/Dense>

#include "kpeval/errors.hpp"

namespace kpeval {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// An elliptical detection region {x' : (x'-center)^T shape^-1 (x'-center) <= 1}.
/// `shape` is symmetric positive-definite; its eigenvalues are the squared radii.
struct EllipticalRegion {
  Vec2 center = Vec2::Zero();
  Mat2 shape = Mat2::Identity();

  EllipticalRegion() = default;
  EllipticalRegion(const Vec2& c, const Mat2& s)
      : center(c), shape(0.5 * (s + s.transpose())) {}  // symmetric by construction

  static EllipticalRegion disk(const Vec2& c, double radius) {
    return {c, radius * radius * Mat2::Identity()};
  }
};

/// A 3x3 invertible matrix mapping frame-b coordinates to frame-a coordinates.
/// The last entry is normalized to 1 on construction.
struct Homography {
  Mat3 matrix = Mat3::Identity();

  Homography() = default;
  explicit Homography(const Mat3& m);

  Homography inverse() const;
};

enum class CriterionVariant {
  Original,    // overlap error on the raw regions
  Normalized,  // both regions rescaled to geometric-mean radius kappa first
  CodeVariant, // Normalized plus a center-distance gate of 4*sqrt(r_a R_a)
};

struct CriterionConfig {
  CriterionVariant variant = CriterionVariant::Original;
  double epsilon_overlap = 0.40;
  double kappa = 30.0;
};

/// Throws InvalidParameter unless epsilon_overlap is in (0,1) and kappa > 0.
void validate(const CriterionConfig& cfg);

/// Maps a point through the homography. Throws DegenerateProjection when the
/// projective denominator is within 1e-12 of zero.
Vec2 project_point(const Homography& h, const Vec2& x);

/// Jacobian of the point map y -> H(y) evaluated at x.
Mat2 local_affine_approx(const Homography& h, const Vec2& x);

/// (sqrt(lambda_min), sqrt(lambda_max)) of the shape matrix; small <= large.
std::pair<double, double> ellipse_radii(const EllipticalRegion& r);

/// Geometric mean of the two radii, i.e. det(shape)^(1/4).
double radii_geometric_mean(const EllipticalRegion& r);

/// Maps a frame-b region into frame a: the center goes through the point map
/// and the shape through the local linearization, so scales, rotations and
/// general affinities transform the ellipse the way they transform the plane.
EllipticalRegion reproject_region(const EllipticalRegion& r_b, const Homography& h);

/// Rescales the shape by kappa^2/(r*R) so the radii geometric mean becomes
/// exactly kappa. Center and eccentricity are unchanged; idempotent.
EllipticalRegion normalize_region(const EllipticalRegion& r, double kappa);

/// Overlap error 1 - |intersection|/|union| of two regions given in a common
/// frame, in [0,1].
///
/// Computed by rasterization: both regions are rescaled about the midpoint of
/// their centers by one common factor so the larger radii geometric mean
/// equals 30 reference pixels (the ratio of areas is invariant under this),
/// then the joint bounding box is sampled at 0.1 px steps. Exact for
/// identical regions (0) and for disjoint supports (1); symmetric in its
/// arguments. Throws ZeroArea when a region degenerates below the raster
/// resolution after rescaling.
double overlap_error(const EllipticalRegion& r_a, const EllipticalRegion& r_b_in_a);

/// Raster frame constants of overlap_error.
inline constexpr double kOverlapReferenceRadius = 30.0;
inline constexpr double kOverlapSampleStep = 0.1;

struct RepeatDecision {
  bool repeated = false;
  double overlap = 1.0;  // the overlap error actually tested (normalized for
                         // the Normalized/CodeVariant rules)
};

/// Tests whether two detections are repeated under the configured criterion.
/// r_b lives in frame b and is reprojected through h first. The comparison
/// against epsilon_overlap is inclusive (<=).
RepeatDecision is_repeated(const EllipticalRegion& r_a, const EllipticalRegion& r_b,
                           const Homography& h, const CriterionConfig& cfg);

/// Largest center distance at which two equal disks of radius r are still
/// repeated under cfg, found by bisection to 1e-3 px.
double max_distance_curve(double r, const CriterionConfig& cfg);

}  // namespace kpeval
