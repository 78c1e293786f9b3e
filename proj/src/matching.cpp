#include "kpeval/matching.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

namespace kpeval {

std::vector<Match> nn_ratio_match(const Eigen::MatrixXd& descriptors_a,
                                  const Eigen::MatrixXd& descriptors_b,
                                  double ratio_threshold) {
  if (!(ratio_threshold > 0.0 && ratio_threshold < 1.0)) {
    throw InvalidParameter("ratio threshold must lie in (0,1)");
  }
  if (descriptors_a.cols() != descriptors_b.cols() || descriptors_a.cols() < 1) {
    throw DimensionMismatch("descriptor lengths disagree");
  }
  if (descriptors_b.rows() < 2) {
    throw TooFewCandidates("the candidate set needs at least two descriptors");
  }

  const double ratio_sq = ratio_threshold * ratio_threshold;
  std::vector<Match> matches;
  for (Eigen::Index i = 0; i < descriptors_a.rows(); ++i) {
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    Eigen::Index nearest = -1;
    for (Eigen::Index j = 0; j < descriptors_b.rows(); ++j) {
      const double d = (descriptors_a.row(i) - descriptors_b.row(j)).squaredNorm();
      if (d < d1) {
        d2 = d1;
        d1 = d;
        nearest = j;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (d1 < ratio_sq * d2) {
      matches.push_back({static_cast<int>(i), static_cast<int>(nearest),
                         std::sqrt(d1), std::sqrt(d1 / d2)});
    }
  }
  return matches;
}

std::vector<char> classify_matches(const std::vector<Match>& matches,
                                   const std::vector<EllipticalRegion>& regions_a,
                                   const std::vector<EllipticalRegion>& regions_b,
                                   const Homography& h, double epsilon) {
  std::vector<char> flags(matches.size(), 0);
  for (size_t m = 0; m < matches.size(); ++m) {
    const EllipticalRegion& region_a = regions_a.at(matches[m].index_a);
    const EllipticalRegion b_in_a = reproject_region(regions_b.at(matches[m].index_b), h);
    flags[m] = overlap_error(region_a, b_in_a) < epsilon;  // strict
  }
  return flags;
}

double nr_correct_count(const std::vector<Match>& matches,
                        const std::vector<char>& correct_flags,
                        const std::vector<EllipticalRegion>& regions_a,
                        const DescriptorMaskConfig& mask_cfg, const DomainRect& omega) {
  std::vector<EllipticalRegion> correct;
  for (size_t m = 0; m < matches.size(); ++m) {
    if (correct_flags[m]) {
      correct.push_back(regions_a.at(matches[m].index_a));
    }
  }
  if (correct.empty()) {
    return 0.0;
  }
  return count_keypoints(accumulate(correct, mask_cfg, omega)).second;
}

namespace {

// Distinct-region tally for multi-described keypoints (several descriptor
// rows sharing one region, e.g. multiple orientations).
int distinct_regions(const std::vector<Match>& matches, const std::vector<char>& flags,
                     const std::vector<EllipticalRegion>& regions_a, bool only_correct) {
  std::set<std::array<double, 5>> seen;
  for (size_t m = 0; m < matches.size(); ++m) {
    if (only_correct && !flags[m]) {
      continue;
    }
    const EllipticalRegion& r = regions_a[matches[m].index_a];
    seen.insert({r.center.x(), r.center.y(), r.shape(0, 0), r.shape(0, 1), r.shape(1, 1)});
  }
  return static_cast<int>(seen.size());
}

}  // namespace

MatchResult evaluate_matches(const DescribedSet& set_a, const DescribedSet& set_b,
                             const Homography& h, const CriterionConfig& criterion,
                             const DescriptorMaskConfig& mask_cfg, const DomainRect& omega,
                             double ratio_threshold) {
  validate(criterion);
  MatchResult result;
  result.pairs = nn_ratio_match(set_a.descriptors, set_b.descriptors, ratio_threshold);
  result.correct_flags = classify_matches(result.pairs, set_a.regions, set_b.regions, h,
                                          criterion.epsilon_overlap);
  result.counts.total = static_cast<int>(result.pairs.size());
  result.counts.correct =
      static_cast<int>(std::count(result.correct_flags.begin(), result.correct_flags.end(), 1));
  result.counts.nr_correct =
      nr_correct_count(result.pairs, result.correct_flags, set_a.regions, mask_cfg, omega);
  result.counts.total_keypoints =
      distinct_regions(result.pairs, result.correct_flags, set_a.regions, false);
  result.counts.correct_keypoints =
      distinct_regions(result.pairs, result.correct_flags, set_a.regions, true);
  return result;
}

}  // namespace kpeval
