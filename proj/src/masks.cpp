#include "kpeval/masks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace kpeval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

std::string lowered(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

const std::vector<DescriptorMaskConfig>& builtin_mask_table() {
  // Footprints as published with each detector: a patch of radius rho times
  // the detection scale, Gaussian-weighted with width zeta times the scale
  // (flat for MSER/EBR/IBR). BRISK values are relative to its raw size s.
  static const std::vector<DescriptorMaskConfig> table = {
      {6.0 * kSqrt2, 6.0, "SIFT"},
      {6.0 * kSqrt2, 6.0, "SIFT-S"},
      {6.0 * kSqrt2, 6.0, "Harris-Laplace"},
      {6.0 * kSqrt2, 6.0, "Hessian-Laplace"},
      {6.0 * kSqrt2, 6.0, "Harris-Affine"},
      {6.0 * kSqrt2, 6.0, "Hessian-Affine"},
      {6.0 * kSqrt2, 6.0, "SFOP"},
      {6.0 * kSqrt2, 6.0, "SIFER"},
      {10.0 * kSqrt2, 3.3, "SURF"},
      {1.5 * kSqrt2, 1.5, "BRISK"},
      {2.0, kInf, "MSER"},
      {1.0, kInf, "EBR"},
      {1.0, kInf, "IBR"},
  };
  return table;
}

std::optional<DescriptorMaskConfig> mask_config_for(const std::string& label) {
  static const std::unordered_map<std::string, std::string> aliases = {
      {"sift-single", "sift-s"}, {"sifts", "sift-s"}, {"sift_s", "sift-s"},
      {"harlap", "harris-laplace"},  {"harris_laplace", "harris-laplace"},
      {"heslap", "hessian-laplace"}, {"hessian_laplace", "hessian-laplace"},
      {"haraff", "harris-affine"},   {"harris_affine", "harris-affine"},
      {"hesaff", "hessian-affine"},  {"hessian_affine", "hessian-affine"},
  };
  std::string key = lowered(label);
  if (auto it = aliases.find(key); it != aliases.end()) {
    key = it->second;
  }
  for (const auto& cfg : builtin_mask_table()) {
    if (lowered(cfg.label) == key) {
      DescriptorMaskConfig out = cfg;
      out.label = label;
      return out;
    }
  }
  return std::nullopt;
}

void validate(const DescriptorMaskConfig& cfg) {
  if (!(cfg.rho > 0.0) || !std::isfinite(cfg.rho)) {
    throw InvalidParameter("mask rho must be positive and finite");
  }
  if (!(cfg.zeta > 0.0)) {  // +inf allowed: flat mask
    throw InvalidParameter("mask zeta must be positive");
  }
}

void validate(const DomainRect& domain) {
  if (domain.width < 1 || domain.height < 1) {
    throw InvalidParameter("domain dimensions must be at least 1x1");
  }
  if (domain.valid.size() != 0 &&
      (domain.valid.rows() != domain.height || domain.valid.cols() != domain.width)) {
    throw InvalidParameter("domain validity mask does not match its dimensions");
  }
}

MaskPatch mask_values(const EllipticalRegion& region, const DescriptorMaskConfig& cfg,
                      const DomainRect& domain) {
  validate(cfg);
  validate(domain);

  const double det = region.shape.determinant();
  if (!(det > 0.0) || !(region.shape(0, 0) > 0.0)) {
    throw NonPositiveDefinite("region shape matrix is not positive-definite");
  }
  const Mat2 q_form = region.shape.inverse();
  const double rho_sq = cfg.rho * cfg.rho;
  const double inv_two_zeta_sq = cfg.flat() ? 0.0 : 1.0 / (2.0 * cfg.zeta * cfg.zeta);

  // Support bounding box: the detection ellipse grown by rho.
  const double half_x = cfg.rho * std::sqrt(region.shape(0, 0));
  const double half_y = cfg.rho * std::sqrt(region.shape(1, 1));
  const int x0 = std::max(0, static_cast<int>(std::floor(region.center.x() - half_x - 0.5)));
  const int x1 = std::min(domain.width - 1,
                          static_cast<int>(std::ceil(region.center.x() + half_x + 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::floor(region.center.y() - half_y - 0.5)));
  const int y1 = std::min(domain.height - 1,
                          static_cast<int>(std::ceil(region.center.y() + half_y + 0.5)));
  if (x1 < x0 || y1 < y0) {
    throw EmptySupport("mask support misses the domain");
  }

  MaskPatch patch;
  patch.x0 = x0;
  patch.y0 = y0;
  patch.values = Eigen::ArrayXXd::Zero(y1 - y0 + 1, x1 - x0 + 1);

  double total = 0.0;
  for (int py = y0; py <= y1; ++py) {
    for (int px = x0; px <= x1; ++px) {
      if (!domain.is_valid_pixel(px, py)) {
        continue;
      }
      const double dx = (px + 0.5) - region.center.x();
      const double dy = (py + 0.5) - region.center.y();
      const double q = q_form(0, 0) * dx * dx + 2.0 * q_form(0, 1) * dx * dy +
                       q_form(1, 1) * dy * dy;
      if (q > rho_sq) {
        continue;
      }
      const double value = cfg.flat() ? 1.0 : std::exp(-q * inv_two_zeta_sq);
      patch.values(py - y0, px - x0) = value;
      total += value;
    }
  }

  if (total <= 0.0) {
    throw EmptySupport("mask support misses the domain");
  }
  patch.values /= total;  // discrete unit integral (pixel_area = 1)
  return patch;
}

CoverageMap accumulate(const std::vector<EllipticalRegion>& regions,
                       const DescriptorMaskConfig& cfg, const DomainRect& domain) {
  validate(cfg);
  validate(domain);

  CoverageMap map;
  map.domain = domain;
  map.sum_field = Eigen::ArrayXXd::Zero(domain.height, domain.width);
  map.max_field = Eigen::ArrayXXd::Zero(domain.height, domain.width);

  for (const auto& region : regions) {
    MaskPatch patch;
    try {
      patch = mask_values(region, cfg, domain);
    } catch (const EmptySupport&) {
      continue;
    }
    auto sum_block = map.sum_field.block(patch.y0, patch.x0, patch.values.rows(),
                                         patch.values.cols());
    auto max_block = map.max_field.block(patch.y0, patch.x0, patch.values.rows(),
                                         patch.values.cols());
    sum_block += patch.values;
    max_block = max_block.max(patch.values);
    ++map.accumulated;
  }
  return map;
}

std::pair<double, double> count_keypoints(const CoverageMap& map) {
  return {map.sum_field.sum() * map.pixel_area, map.max_field.sum() * map.pixel_area};
}

double nr_ratio(const std::vector<EllipticalRegion>& regions,
                const DescriptorMaskConfig& cfg, const DomainRect& domain) {
  if (regions.empty()) {
    throw EmptySet("nr_ratio needs at least one detection");
  }
  const CoverageMap map = accumulate(regions, cfg, domain);
  const auto [k, k_nr] = count_keypoints(map);
  if (!(k > 0.0)) {
    throw EmptySupport("no mask touches the domain");
  }
  return k_nr / k;
}

}  // namespace kpeval
