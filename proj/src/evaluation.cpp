#include "kpeval/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kpeval/matching.hpp"

namespace kpeval {

namespace {

DetectionSet subset(const DetectionSet& set, const std::vector<int>& kept) {
  DetectionSet out;
  out.detector_label = set.detector_label;
  out.image_domain = set.image_domain;
  out.detections.reserve(kept.size());
  for (int idx : kept) {
    out.detections.push_back(set.detections[idx]);
  }
  if (set.has_descriptors()) {
    out.descriptors.resize(static_cast<Eigen::Index>(kept.size()), set.descriptors.cols());
    for (size_t row = 0; row < kept.size(); ++row) {
      out.descriptors.row(static_cast<Eigen::Index>(row)) = set.descriptors.row(kept[row]);
    }
  }
  return out;
}

}  // namespace

DomainRect common_region_mask(const DomainRect& domain, const Homography& to_other,
                              const DomainRect& other) {
  DomainRect omega(domain.width, domain.height);
  omega.valid.setConstant(domain.height, domain.width, false);
  for (int py = 0; py < domain.height; ++py) {
    for (int px = 0; px < domain.width; ++px) {
      if (!domain.is_valid_pixel(px, py)) {
        continue;
      }
      try {
        const Vec2 mapped = project_point(to_other, Vec2(px + 0.5, py + 0.5));
        omega.valid(py, px) = other.contains_point(mapped.x(), mapped.y());
      } catch (const DegenerateProjection&) {
        // pixel outside the mappable plane, leave invalid
      }
    }
  }
  return omega;
}

CommonRegionFilter filter_common_region(const DetectionSet& set_a,
                                        const DetectionSet& set_b,
                                        const Homography& h) {
  const Homography h_inv = h.inverse();

  CommonRegionFilter out;
  for (size_t i = 0; i < set_a.detections.size(); ++i) {
    try {
      const Vec2 mapped = project_point(h_inv, set_a.detections[i].center);
      if (set_b.image_domain.contains_point(mapped.x(), mapped.y())) {
        out.kept_a.push_back(static_cast<int>(i));
      }
    } catch (const DegenerateProjection&) {
      ++out.dropped_a;
    }
  }
  for (size_t j = 0; j < set_b.detections.size(); ++j) {
    try {
      const Vec2 mapped = project_point(h, set_b.detections[j].center);
      if (set_a.image_domain.contains_point(mapped.x(), mapped.y())) {
        out.kept_b.push_back(static_cast<int>(j));
      }
    } catch (const DegenerateProjection&) {
      ++out.dropped_b;
    }
  }

  out.a = subset(set_a, out.kept_a);
  out.b = subset(set_b, out.kept_b);
  out.omega = common_region_mask(set_a.image_domain, h_inv, set_b.image_domain);
  return out;
}

std::vector<RepeatedPair> greedy_one_to_one(std::vector<RepeatedPair> candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const RepeatedPair& lhs, const RepeatedPair& rhs) {
              if (lhs.overlap != rhs.overlap) return lhs.overlap < rhs.overlap;
              if (lhs.index_a != rhs.index_a) return lhs.index_a < rhs.index_a;
              return lhs.index_b < rhs.index_b;
            });

  int max_a = -1;
  int max_b = -1;
  for (const auto& c : candidates) {
    max_a = std::max(max_a, c.index_a);
    max_b = std::max(max_b, c.index_b);
  }
  std::vector<char> used_a(max_a + 1, 0);
  std::vector<char> used_b(max_b + 1, 0);

  std::vector<RepeatedPair> pairs;
  for (const auto& c : candidates) {
    if (used_a[c.index_a] || used_b[c.index_b]) {
      continue;
    }
    used_a[c.index_a] = 1;
    used_b[c.index_b] = 1;
    pairs.push_back(c);
  }
  return pairs;
}

std::vector<RepeatedPair> find_correspondences(const DetectionSet& filtered_a,
                                               const DetectionSet& filtered_b,
                                               const Homography& h,
                                               const CriterionConfig& cfg) {
  validate(cfg);
  const bool normalized = cfg.variant != CriterionVariant::Original;

  const int n_a = static_cast<int>(filtered_a.detections.size());
  const int n_b = static_cast<int>(filtered_b.detections.size());

  std::vector<EllipticalRegion> b_in_a(n_b);
  for (int j = 0; j < n_b; ++j) {
    b_in_a[j] = reproject_region(filtered_b.detections[j], h);
  }

  // Regions the overlap test actually runs on, plus cheap per-region bounds.
  std::vector<EllipticalRegion> test_a(n_a), test_b(n_b);
  std::vector<double> bound_a(n_a), bound_b(n_b), gmean_a(n_a), gmean_b(n_b);
  std::vector<double> gate_a(n_a);
  for (int i = 0; i < n_a; ++i) {
    gate_a[i] = 4.0 * radii_geometric_mean(filtered_a.detections[i]);
    test_a[i] = normalized ? normalize_region(filtered_a.detections[i], cfg.kappa)
                           : filtered_a.detections[i];
    bound_a[i] = ellipse_radii(test_a[i]).second;
    gmean_a[i] = radii_geometric_mean(test_a[i]);
  }
  for (int j = 0; j < n_b; ++j) {
    test_b[j] = normalized ? normalize_region(b_in_a[j], cfg.kappa) : b_in_a[j];
    bound_b[j] = ellipse_radii(test_b[j]).second;
    gmean_b[j] = radii_geometric_mean(test_b[j]);
  }

  std::vector<RepeatedPair> candidates;
  for (int i = 0; i < n_a; ++i) {
    for (int j = 0; j < n_b; ++j) {
      if (cfg.variant == CriterionVariant::CodeVariant &&
          (filtered_a.detections[i].center - b_in_a[j].center).norm() > gate_a[i]) {
        continue;
      }
      const double distance = (test_a[i].center - test_b[j].center).norm();
      if (distance > bound_a[i] + bound_b[j]) {
        continue;  // disjoint supports, error is exactly 1
      }
      // |I|/|U| <= min(area)/max(area), so a small area ratio already proves
      // the pair exceeds epsilon without rasterizing.
      const double ratio = std::min(gmean_a[i], gmean_b[j]) / std::max(gmean_a[i], gmean_b[j]);
      if (1.0 - ratio * ratio > cfg.epsilon_overlap) {
        continue;
      }
      const double error = overlap_error(test_a[i], test_b[j]);
      if (error <= cfg.epsilon_overlap) {
        candidates.push_back({i, j, error});
      }
    }
  }
  return greedy_one_to_one(std::move(candidates));
}

double repeatability(const std::vector<RepeatedPair>& pairs, int count_a, int count_b) {
  const int denom = std::min(count_a, count_b);
  if (denom < 1) {
    throw EmptyCommonRegion("no detections in the common region");
  }
  return static_cast<double>(pairs.size()) / static_cast<double>(denom);
}

double nr_repeatability(const std::vector<RepeatedPair>& pairs,
                        const DetectionSet& filtered_a, const DescriptorMaskConfig& cfg,
                        const DomainRect& omega, int count_a, int count_b) {
  const int denom = std::min(count_a, count_b);
  if (denom < 1) {
    throw EmptyCommonRegion("no detections in the common region");
  }
  if (pairs.empty()) {
    return 0.0;
  }
  std::vector<EllipticalRegion> repeated;
  repeated.reserve(pairs.size());
  for (const auto& p : pairs) {
    repeated.push_back(filtered_a.detections[p.index_a]);
  }
  const auto [k, k_nr] = count_keypoints(accumulate(repeated, cfg, omega));
  (void)k;
  return k_nr / static_cast<double>(denom);
}

DetectionSet duplicate_set(const DetectionSet& set, int factor) {
  if (factor < 2) {
    throw InvalidParameter("duplication factor must be at least 2");
  }
  DetectionSet out;
  out.detector_label = set.detector_label;
  out.image_domain = set.image_domain;
  const size_t n = set.detections.size();
  out.detections.reserve(n * factor);
  for (int copy = 0; copy < factor; ++copy) {
    out.detections.insert(out.detections.end(), set.detections.begin(),
                          set.detections.end());
  }
  if (set.has_descriptors()) {
    out.descriptors.resize(static_cast<Eigen::Index>(n) * factor, set.descriptors.cols());
    for (int copy = 0; copy < factor; ++copy) {
      out.descriptors.middleRows(copy * static_cast<Eigen::Index>(n),
                                 static_cast<Eigen::Index>(n)) = set.descriptors;
    }
  }
  return out;
}

PairEvaluation evaluate_pair(const DetectionSet& set_a, const DetectionSet& set_b,
                             const Homography& h, const CriterionConfig& criterion,
                             const DescriptorMaskConfig& mask_cfg,
                             bool with_matches, double ratio_threshold) {
  PairEvaluation eval;
  eval.detector = set_a.detector_label;

  CommonRegionFilter filter = filter_common_region(set_a, set_b, h);
  eval.count_a = static_cast<int>(filter.a.detections.size());
  eval.count_b = static_cast<int>(filter.b.detections.size());
  eval.dropped_a = filter.dropped_a;
  eval.dropped_b = filter.dropped_b;

  eval.repeated = find_correspondences(filter.a, filter.b, h, criterion);
  eval.rep = repeatability(eval.repeated, eval.count_a, eval.count_b);
  eval.nr_rep = nr_repeatability(eval.repeated, filter.a, mask_cfg, filter.omega,
                                 eval.count_a, eval.count_b);
  eval.nr_ratio_a = nr_ratio(filter.a.detections, mask_cfg, filter.omega);

  const DomainRect omega_b =
      common_region_mask(set_b.image_domain, h, set_a.image_domain);
  eval.nr_ratio_b = nr_ratio(filter.b.detections, mask_cfg, omega_b);

  if (with_matches) {
    if (!filter.a.has_descriptors() || !filter.b.has_descriptors()) {
      throw InvalidParameter("matching requested but a region file carries no descriptors");
    }
    const MatchResult matches = evaluate_matches(
        {filter.a.detections, filter.a.descriptors},
        {filter.b.detections, filter.b.descriptors}, h, criterion, mask_cfg,
        filter.omega, ratio_threshold);
    eval.has_matches = true;
    eval.matches = matches.counts;
  }
  return eval;
}

SyntheticPair make_synthetic_pair(int detections, int width, int height,
                                  std::uint64_t seed) {
  if (detections < 1 || width < 16 || height < 16) {
    throw InvalidParameter("synthetic pair needs >=1 detections on a >=16x16 domain");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Mild projective map, frame b -> frame a.
  Mat3 m;
  m << 1.0 + 0.04 * unit(rng), 0.02 * unit(rng), 2.0 * unit(rng),
      -0.02 * unit(rng), 1.0 - 0.03 * unit(rng), -2.0 * unit(rng),
      2e-5 * unit(rng), -2e-5 * unit(rng), 1.0;
  const Homography h(m);
  const Homography h_inv = h.inverse();

  const double margin = 0.15;
  const auto random_region = [&](double min_radius, double max_radius) {
    const Vec2 center(width * (margin + (1.0 - 2.0 * margin) * unit(rng)),
                      height * (margin + (1.0 - 2.0 * margin) * unit(rng)));
    const double r1 = min_radius + (max_radius - min_radius) * unit(rng);
    const double r2 = min_radius + (max_radius - min_radius) * unit(rng);
    const double theta = 2.0 * M_PI * unit(rng);
    const Mat2 rot = Eigen::Rotation2Dd(theta).toRotationMatrix();
    const Mat2 shape = rot * Eigen::DiagonalMatrix<double, 2>(r1 * r1, r2 * r2) * rot.transpose();
    return EllipticalRegion(center, shape);
  };

  SyntheticPair pair;
  pair.h = h;
  pair.set_a.detector_label = "synthetic";
  pair.set_a.image_domain = DomainRect(width, height);
  pair.set_b = pair.set_a;

  for (int i = 0; i < detections; ++i) {
    const EllipticalRegion region_a = random_region(2.0, 6.0);
    pair.set_a.detections.push_back(region_a);

    // Roughly 70% of the detections re-occur in image b with a small jitter.
    if (unit(rng) < 0.7) {
      const Vec2 center_b = project_point(h_inv, region_a.center);
      const Mat2 jac_inv = local_affine_approx(h_inv, region_a.center);
      const double jitter_span = 0.5;
      const Vec2 jitter(jitter_span * (2.0 * unit(rng) - 1.0),
                        jitter_span * (2.0 * unit(rng) - 1.0));
      pair.set_b.detections.emplace_back(center_b + jitter,
                                         jac_inv * region_a.shape * jac_inv.transpose());
    } else {
      pair.set_b.detections.push_back(random_region(2.0, 6.0));
    }
  }
  return pair;
}

DuplicationExperiment run_duplication_experiment(const SyntheticPair& pair,
                                                 const CriterionConfig& criterion,
                                                 const DescriptorMaskConfig& mask_cfg,
                                                 int factor) {
  DuplicationExperiment experiment;
  experiment.base = evaluate_pair(pair.set_a, pair.set_b, pair.h, criterion, mask_cfg);
  experiment.duplicated =
      evaluate_pair(duplicate_set(pair.set_a, factor), duplicate_set(pair.set_b, factor),
                    pair.h, criterion, mask_cfg);
  return experiment;
}

}  // namespace kpeval
