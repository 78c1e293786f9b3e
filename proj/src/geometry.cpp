#include "kpeval/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace kpeval {

namespace {

constexpr double kProjectionTol = 1e-12;

// Eigenvalues of a symmetric 2x2 matrix, ascending. Closed form; the matrices
// here are tiny and this avoids allocating a solver per call.
std::pair<double, double> symmetric_eigenvalues(const Mat2& s) {
  const double half_trace = 0.5 * (s(0, 0) + s(1, 1));
  const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  const double disc = std::sqrt(std::max(0.0, half_trace * half_trace - det));
  return {half_trace - disc, half_trace + disc};
}

}  // namespace

Homography::Homography(const Mat3& m) : matrix(m) {
  const double w = matrix(2, 2);
  if (std::abs(w) < kProjectionTol) {
    throw MalformedMatrix("homography cannot be normalized, entry (3,3) is zero");
  }
  matrix /= w;
  if (std::abs(matrix.determinant()) < kProjectionTol) {
    throw Singular("homography determinant is zero");
  }
}

Homography Homography::inverse() const {
  return Homography(Mat3(matrix.inverse()));
}

void validate(const CriterionConfig& cfg) {
  if (!(cfg.epsilon_overlap > 0.0 && cfg.epsilon_overlap < 1.0)) {
    throw InvalidParameter("epsilon_overlap must lie in (0,1)");
  }
  if (!(cfg.kappa > 0.0)) {
    throw InvalidParameter("kappa must be positive");
  }
}

Vec2 project_point(const Homography& h, const Vec2& x) {
  const Mat3& m = h.matrix;
  const double w = m(2, 0) * x.x() + m(2, 1) * x.y() + m(2, 2);
  if (std::abs(w) < kProjectionTol) {
    throw DegenerateProjection("projective denominator vanishes at the given point");
  }
  return {(m(0, 0) * x.x() + m(0, 1) * x.y() + m(0, 2)) / w,
          (m(1, 0) * x.x() + m(1, 1) * x.y() + m(1, 2)) / w};
}

Mat2 local_affine_approx(const Homography& h, const Vec2& x) {
  const Mat3& m = h.matrix;
  const double w = m(2, 0) * x.x() + m(2, 1) * x.y() + m(2, 2);
  if (std::abs(w) < kProjectionTol) {
    throw DegenerateProjection("projective denominator vanishes at the given point");
  }
  const double u = m(0, 0) * x.x() + m(0, 1) * x.y() + m(0, 2);
  const double v = m(1, 0) * x.x() + m(1, 1) * x.y() + m(1, 2);
  Mat2 jac;
  jac(0, 0) = (m(0, 0) * w - u * m(2, 0)) / (w * w);
  jac(0, 1) = (m(0, 1) * w - u * m(2, 1)) / (w * w);
  jac(1, 0) = (m(1, 0) * w - v * m(2, 0)) / (w * w);
  jac(1, 1) = (m(1, 1) * w - v * m(2, 1)) / (w * w);
  return jac;
}

std::pair<double, double> ellipse_radii(const EllipticalRegion& r) {
  const auto [lo, hi] = symmetric_eigenvalues(r.shape);
  if (!(lo > 0.0) || !std::isfinite(hi)) {
    throw NonPositiveDefinite("region shape matrix is not positive-definite");
  }
  return {std::sqrt(lo), std::sqrt(hi)};
}

double radii_geometric_mean(const EllipticalRegion& r) {
  const double det = r.shape.determinant();
  if (!(det > 0.0) || !(r.shape(0, 0) > 0.0)) {
    throw NonPositiveDefinite("region shape matrix is not positive-definite");
  }
  return std::pow(det, 0.25);
}

EllipticalRegion reproject_region(const EllipticalRegion& r_b, const Homography& h) {
  const Mat2 jac = local_affine_approx(h, r_b.center);
  EllipticalRegion out(project_point(h, r_b.center),
                       jac * r_b.shape * jac.transpose());
  const auto [lo, hi] = symmetric_eigenvalues(out.shape);
  if (!(lo > 0.0) || !std::isfinite(hi)) {
    throw NonPositiveDefinite("reprojected shape lost positive-definiteness");
  }
  return out;
}

EllipticalRegion normalize_region(const EllipticalRegion& r, double kappa) {
  if (!(kappa > 0.0)) {
    throw InvalidParameter("kappa must be positive");
  }
  const double det = r.shape.determinant();
  if (!(det > 0.0) || !(r.shape(0, 0) > 0.0)) {
    throw NonPositiveDefinite("region shape matrix is not positive-definite");
  }
  // r*R = sqrt(det), so kappa^2/(r*R) rescales the geometric mean to kappa.
  const double factor = kappa * kappa / std::sqrt(det);
  return {r.center, Mat2(factor * r.shape)};
}

namespace {

struct RasterRegion {
  Vec2 center;
  Mat2 inverse_shape;
  double bbox_half_x = 0.0;
  double bbox_half_y = 0.0;

  explicit RasterRegion(const EllipticalRegion& r)
      : center(r.center), inverse_shape(r.shape.inverse()) {
    bbox_half_x = std::sqrt(r.shape(0, 0));
    bbox_half_y = std::sqrt(r.shape(1, 1));
  }

  bool contains(double x, double y) const {
    const double dx = x - center.x();
    const double dy = y - center.y();
    const double q = inverse_shape(0, 0) * dx * dx +
                     2.0 * inverse_shape(0, 1) * dx * dy +
                     inverse_shape(1, 1) * dy * dy;
    return q <= 1.0;
  }
};

}  // namespace

double overlap_error(const EllipticalRegion& r_a, const EllipticalRegion& r_b_in_a) {
  const auto [small_a, large_a] = ellipse_radii(r_a);
  const auto [small_b, large_b] = ellipse_radii(r_b_in_a);
  (void)small_a;
  (void)small_b;

  // Disjoint bounding circles mean an empty intersection, so the error is
  // exactly 1 and no raster is needed.
  const double center_distance = (r_a.center - r_b_in_a.center).norm();
  if (center_distance > large_a + large_b) {
    return 1.0;
  }

  const double g_a = radii_geometric_mean(r_a);
  const double g_b = radii_geometric_mean(r_b_in_a);
  const double scale = kOverlapReferenceRadius / std::max(g_a, g_b);
  const Vec2 mid = 0.5 * (r_a.center + r_b_in_a.center);

  const EllipticalRegion sa(mid + scale * (r_a.center - mid),
                            Mat2(scale * scale * r_a.shape));
  const EllipticalRegion sb(mid + scale * (r_b_in_a.center - mid),
                            Mat2(scale * scale * r_b_in_a.shape));

  const RasterRegion ra(sa);
  const RasterRegion rb(sb);

  const double x_lo = std::min(ra.center.x() - ra.bbox_half_x, rb.center.x() - rb.bbox_half_x);
  const double x_hi = std::max(ra.center.x() + ra.bbox_half_x, rb.center.x() + rb.bbox_half_x);
  const double y_lo = std::min(ra.center.y() - ra.bbox_half_y, rb.center.y() - rb.bbox_half_y);
  const double y_hi = std::max(ra.center.y() + ra.bbox_half_y, rb.center.y() + rb.bbox_half_y);

  const long nx = std::max<long>(1, static_cast<long>(std::ceil((x_hi - x_lo) / kOverlapSampleStep)));
  const long ny = std::max<long>(1, static_cast<long>(std::ceil((y_hi - y_lo) / kOverlapSampleStep)));

  long count_a = 0;
  long count_b = 0;
  long count_both = 0;
  for (long iy = 0; iy < ny; ++iy) {
    const double y = y_lo + (iy + 0.5) * kOverlapSampleStep;
    for (long ix = 0; ix < nx; ++ix) {
      const double x = x_lo + (ix + 0.5) * kOverlapSampleStep;
      const bool in_a = ra.contains(x, y);
      const bool in_b = rb.contains(x, y);
      count_a += in_a;
      count_b += in_b;
      count_both += in_a && in_b;
    }
  }

  if (count_a == 0 || count_b == 0) {
    throw ZeroArea("region degenerates below the raster resolution");
  }
  const long count_union = count_a + count_b - count_both;
  return 1.0 - static_cast<double>(count_both) / static_cast<double>(count_union);
}

RepeatDecision is_repeated(const EllipticalRegion& r_a, const EllipticalRegion& r_b,
                           const Homography& h, const CriterionConfig& cfg) {
  validate(cfg);
  const EllipticalRegion r_b_in_a = reproject_region(r_b, h);

  RepeatDecision decision;
  switch (cfg.variant) {
    case CriterionVariant::Original:
      decision.overlap = overlap_error(r_a, r_b_in_a);
      decision.repeated = decision.overlap <= cfg.epsilon_overlap;
      break;
    case CriterionVariant::Normalized:
      decision.overlap = overlap_error(normalize_region(r_a, cfg.kappa),
                                       normalize_region(r_b_in_a, cfg.kappa));
      decision.repeated = decision.overlap <= cfg.epsilon_overlap;
      break;
    case CriterionVariant::CodeVariant: {
      decision.overlap = overlap_error(normalize_region(r_a, cfg.kappa),
                                       normalize_region(r_b_in_a, cfg.kappa));
      // Distance gate on the unnormalized reference region: 4*sqrt(r_a R_a).
      const double gate = 4.0 * radii_geometric_mean(r_a);
      const double distance = (r_a.center - r_b_in_a.center).norm();
      decision.repeated = decision.overlap <= cfg.epsilon_overlap && distance <= gate;
      break;
    }
  }
  return decision;
}

double max_distance_curve(double r, const CriterionConfig& cfg) {
  validate(cfg);
  if (!(r > 0.0)) {
    throw InvalidParameter("disk radius must be positive");
  }

  const EllipticalRegion disk_a = EllipticalRegion::disk(Vec2::Zero(), r);
  const Homography identity;
  const auto repeated_at = [&](double d) {
    const EllipticalRegion disk_b = EllipticalRegion::disk(Vec2(d, 0.0), r);
    return is_repeated(disk_a, disk_b, identity, cfg).repeated;
  };

  // At 2*max(r,kappa) both raw and normalized disks are disjoint, and beyond
  // 4r the CodeVariant gate fails too, so the predicate is false at `hi`.
  double lo = 0.0;
  double hi = 2.0 * std::max(r, cfg.kappa) + 4.0 * r + 2.0;
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    (repeated_at(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace kpeval
