#pragma once

#include <vector>

#include "kpeval/geometry.hpp"
#include "kpeval/masks.hpp"

namespace kpeval {

/// A set of described detections in struct-of-arrays form: descriptor row i
/// belongs to region i.
struct DescribedSet {
  std::vector<EllipticalRegion> regions;
  Eigen::MatrixXd descriptors;  // regions.size() x dim
};

struct Match {
  int index_a = 0;
  int index_b = 0;
  double distance = 0.0;  // Euclidean distance to the nearest neighbor
  double nn_ratio = 0.0;  // distance ratio to the second nearest neighbor
};

struct MatchCounts {
  int total = 0;
  int correct = 0;
  double nr_correct = 0.0;
  int total_keypoints = 0;    // distinct matched reference regions
  int correct_keypoints = 0;  // distinct correctly matched reference regions
};

struct MatchResult {
  std::vector<Match> pairs;
  std::vector<char> correct_flags;  // aligned with pairs
  MatchCounts counts;
};

/// Nearest-neighbor ratio matching from a to b on raw Euclidean distances:
/// a query matches its nearest neighbor iff d1 < ratio_threshold * d2, with
/// d2 the distance to the second nearest neighbor (the comparison is carried
/// out on squared distances). Ties pick the lower b index, so exact duplicate
/// rows in b yield d1 = d2 and suppress the match.
std::vector<Match> nn_ratio_match(const Eigen::MatrixXd& descriptors_a,
                                  const Eigen::MatrixXd& descriptors_b,
                                  double ratio_threshold);

/// Flags a match correct iff the overlap error of its two regions, compared
/// in frame a under the scale-invariant rule, is strictly below epsilon.
std::vector<char> classify_matches(const std::vector<Match>& matches,
                                   const std::vector<EllipticalRegion>& regions_a,
                                   const std::vector<EllipticalRegion>& regions_b,
                                   const Homography& h, double epsilon);

/// K_nr of the correctly matched reference regions over omega; 0 when none.
double nr_correct_count(const std::vector<Match>& matches,
                        const std::vector<char>& correct_flags,
                        const std::vector<EllipticalRegion>& regions_a,
                        const DescriptorMaskConfig& mask_cfg, const DomainRect& omega);

/// Runs the full matching protocol and tallies the counts, both per
/// descriptor row and per distinct reference keypoint.
MatchResult evaluate_matches(const DescribedSet& set_a, const DescribedSet& set_b,
                             const Homography& h, const CriterionConfig& criterion,
                             const DescriptorMaskConfig& mask_cfg, const DomainRect& omega,
                             double ratio_threshold);

}  // namespace kpeval
