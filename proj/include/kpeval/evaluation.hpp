#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kpeval/geometry.hpp"
#include "kpeval/masks.hpp"
#include "kpeval/matching.hpp"

namespace kpeval {

/// Detections of one detector on one image, with optional descriptor rows
/// aligned with the detection order (0 rows when the file carries none).
struct DetectionSet {
  std::vector<EllipticalRegion> detections;
  std::string detector_label;
  DomainRect image_domain;
  Eigen::MatrixXd descriptors;  // detections.size() x dim, or 0 x 0

  bool has_descriptors() const { return descriptors.rows() > 0; }
};

struct RepeatedPair {
  int index_a = 0;
  int index_b = 0;
  double overlap = 0.0;
};

/// Outcome of restricting a pair of detection sets to the common region.
struct CommonRegionFilter {
  DetectionSet a;
  DetectionSet b;
  std::vector<int> kept_a;  // indices into the unfiltered sets
  std::vector<int> kept_b;
  int dropped_a = 0;  // centers with degenerate projections, discarded
  int dropped_b = 0;
  DomainRect omega;  // image-a rectangle masked to the pixels that map into b
};

/// Keeps detections whose centers map into the other image's rectangle
/// (h maps frame b to frame a). Omega is the frame-a mask of the area covered
/// by both images.
CommonRegionFilter filter_common_region(const DetectionSet& set_a,
                                        const DetectionSet& set_b,
                                        const Homography& h);

/// Mask of the pixels of `domain` whose centers map into `other` under
/// `to_other`; pixels with degenerate projections are excluded.
DomainRect common_region_mask(const DomainRect& domain, const Homography& to_other,
                              const DomainRect& other);

/// Deterministic greedy one-to-one selection: candidates are taken in
/// ascending (overlap, index_a, index_b) order, each index used at most once.
std::vector<RepeatedPair> greedy_one_to_one(std::vector<RepeatedPair> candidates);

/// All repeated pairs under cfg, reduced to a one-to-one assignment by
/// greedy_one_to_one. Pairs that provably cannot meet the overlap threshold
/// (disjoint bounding circles, or an area ratio already above epsilon) are
/// skipped without rasterization.
std::vector<RepeatedPair> find_correspondences(const DetectionSet& filtered_a,
                                               const DetectionSet& filtered_b,
                                               const Homography& h,
                                               const CriterionConfig& cfg);

/// |pairs| / min(count_a, count_b). Throws EmptyCommonRegion when a count is 0.
double repeatability(const std::vector<RepeatedPair>& pairs, int count_a, int count_b);

/// Non-redundant repeatability: K_nr of the frame-a members of the repeated
/// pairs (masks over omega) divided by min(count_a, count_b).
double nr_repeatability(const std::vector<RepeatedPair>& pairs,
                        const DetectionSet& filtered_a, const DescriptorMaskConfig& cfg,
                        const DomainRect& omega, int count_a, int count_b);

/// Every detection (and descriptor row) repeated `factor` times: the original
/// block followed by the copies.
DetectionSet duplicate_set(const DetectionSet& set, int factor);

/// Per-pair metrics emitted by the sequence runner.
struct PairEvaluation {
  std::string detector;
  std::string sequence;
  std::string ref_image;
  std::string test_image;
  int count_a = 0;
  int count_b = 0;
  int dropped_a = 0;
  int dropped_b = 0;
  std::vector<RepeatedPair> repeated;
  double rep = 0.0;
  double nr_rep = 0.0;
  double nr_ratio_a = 0.0;
  double nr_ratio_b = 0.0;
  bool has_matches = false;
  MatchCounts matches;
};

/// Full pair pipeline: common-region filter, correspondences, repeatability,
/// non-redundant repeatability and both per-image nr-ratios. Descriptor
/// matching is appended when `with_matches` is set (both sets must then carry
/// descriptors).
PairEvaluation evaluate_pair(const DetectionSet& set_a, const DetectionSet& set_b,
                             const Homography& h, const CriterionConfig& criterion,
                             const DescriptorMaskConfig& mask_cfg,
                             bool with_matches = false, double ratio_threshold = 0.6);

/// One synthetic detector pair for the duplication experiment: a random set
/// on the reference image and its jittered reprojection (plus clutter) on the
/// test image.
struct SyntheticPair {
  DetectionSet set_a;
  DetectionSet set_b;
  Homography h;  // frame b -> frame a
};

SyntheticPair make_synthetic_pair(int detections, int width, int height,
                                  std::uint64_t seed);

/// Duplication bias experiment: evaluates a synthetic pair as-is and with
/// every detection duplicated `factor` times.
struct DuplicationExperiment {
  PairEvaluation base;
  PairEvaluation duplicated;
};

DuplicationExperiment run_duplication_experiment(const SyntheticPair& pair,
                                                 const CriterionConfig& criterion,
                                                 const DescriptorMaskConfig& mask_cfg,
                                                 int factor);

}  // namespace kpeval
