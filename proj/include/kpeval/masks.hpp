#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <string>
#include <vector>

#include "kpeval/geometry.hpp"

namespace kpeval {

/// Extent parameters of the descriptor mask attached to a detection, both
/// expressed as multiples of the detection ellipse: the mask is supported on
/// the ellipse grown by `rho` and weighted by exp(-q/(2 zeta^2)) in the
/// Mahalanobis form q of the detection. `zeta = +inf` marks an unweighted
/// (flat) mask.
struct DescriptorMaskConfig {
  double rho = 1.0;
  double zeta = 1.0;
  std::string label;

  bool flat() const { return !std::isfinite(zeta); }

  /// Same footprint expressed against a region whose linear unit was divided
  /// by `factor` (e.g. a size column stored as 4x the scale).
  DescriptorMaskConfig scaled(double factor) const {
    return {rho * factor, flat() ? zeta : zeta * factor, label};
  }
};

/// Built-in per-detector mask table.
const std::vector<DescriptorMaskConfig>& builtin_mask_table();

/// Case-insensitive lookup, accepting the common short aliases
/// (harlap, heslap, haraff, hesaff, sift-s, ...).
std::optional<DescriptorMaskConfig> mask_config_for(const std::string& label);

void validate(const DescriptorMaskConfig& cfg);

/// Discrete raster domain. Fields are sampled once per pixel at pixel
/// centers (px + 0.5, py + 0.5). An empty `valid` array means every pixel is
/// valid; otherwise only pixels with valid(py, px) participate in masks and
/// integrals (the common-region mask).
struct DomainRect {
  int width = 0;
  int height = 0;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> valid;  // height x width

  DomainRect() = default;
  DomainRect(int w, int h) : width(w), height(h) {}

  bool is_valid_pixel(int px, int py) const {
    return valid.size() == 0 || valid(py, px);
  }
  bool contains_point(double x, double y) const {
    return x >= 0.0 && x < width && y >= 0.0 && y < height;
  }
};

void validate(const DomainRect& domain);

/// Dense rectangular patch of mask samples anchored at pixel (x0, y0).
struct MaskPatch {
  int x0 = 0;
  int y0 = 0;
  Eigen::ArrayXXd values;  // rows = patch height, cols = patch width
};

/// Sum and max of the per-detection mask functions over a domain raster.
struct CoverageMap {
  DomainRect domain;
  Eigen::ArrayXXd sum_field;  // height x width
  Eigen::ArrayXXd max_field;  // height x width
  double pixel_area = 1.0;
  int accumulated = 0;  // masks that contributed (support met the domain)
};

/// Samples the truncated elliptical Gaussian mask of one detection on the
/// domain raster. Values are normalized so the discrete integral over the
/// visible (valid) part of the domain equals 1; masks clipped by the border
/// are renormalized over what remains. Throws EmptySupport when the
/// truncated ellipse misses the domain entirely.
MaskPatch mask_values(const EllipticalRegion& region, const DescriptorMaskConfig& cfg,
                      const DomainRect& domain);

/// Accumulates sum and max fields over all detections. Detections whose
/// support misses the domain contribute nothing; `accumulated` reports how
/// many masks actually entered the fields.
CoverageMap accumulate(const std::vector<EllipticalRegion>& regions,
                       const DescriptorMaskConfig& cfg, const DomainRect& domain);

/// K (integral of the sum field) and K_nr (integral of the max field).
std::pair<double, double> count_keypoints(const CoverageMap& map);

/// Non-redundant detection ratio K_nr / K. Throws EmptySet for an empty
/// detection list and EmptySupport when no mask touches the domain.
double nr_ratio(const std::vector<EllipticalRegion>& regions,
                const DescriptorMaskConfig& cfg, const DomainRect& domain);

}  // namespace kpeval
