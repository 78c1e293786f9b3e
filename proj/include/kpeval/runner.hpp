#pragma once

#include <string>
#include <vector>

#include "kpeval/io.hpp"

namespace kpeval {

/// Everything a sequence evaluation needs, as assembled by the CLI.
struct RunConfig {
  std::string manifest_path;
  CriterionConfig criterion;
  double ratio_threshold = 0.6;
  int jobs = 1;
  std::string out_dir = ".";
  bool invert_homography = false;  // dataset homographies map reference -> test
  int synth_factor = 1;            // >= 2: duplicate every detection set
  std::vector<DescriptorMaskConfig> mask_overrides;
  bool with_matches = false;
  bool dump_coverage = false;
};

void validate(const RunConfig& run);

/// Evaluates every (reference, test) pair of every detector in the manifest.
/// Jobs run on a pool of `run.jobs` workers; results are returned in manifest
/// order (detector-major) regardless of the parallelism degree, and the first
/// failing job in that order is reported.
std::vector<PairEvaluation> evaluate_sequence(const RunConfig& run);

/// Mask configuration a run uses for a detector: overrides first, then the
/// built-in table, rescaled when the size column was declared as BRISK sizes.
DescriptorMaskConfig resolve_mask_config(const RunConfig& run,
                                         const ManifestDetector& detector);

// Metric CSV writers, one file per metric under out_dir.
void write_repeatability_reports(const std::vector<PairEvaluation>& evals,
                                 const std::string& out_dir);
void write_nr_ratio_reports(const std::vector<PairEvaluation>& evals,
                            const std::string& out_dir);
void write_matching_reports(const std::vector<PairEvaluation>& evals,
                            const std::string& out_dir);

/// d_max samples over a grid of radii and overlap tolerances.
std::vector<CurveRow> emit_curves(CriterionVariant variant,
                                  const std::vector<double>& epsilons,
                                  const std::vector<double>& radii, double kappa);

/// One row of the duplication experiment per synthetic pair and metric.
struct SynthRow {
  int pair_index = 0;
  std::string metric;  // rep | nr_rep | nr_ratio
  double base = 0.0;
  double duplicated = 0.0;
};

std::vector<SynthRow> run_synth_experiments(int pairs, int detections, std::uint64_t seed,
                                            const CriterionConfig& criterion, int factor);

void write_synth_csv(const std::string& path, const std::vector<SynthRow>& rows);

}  // namespace kpeval
