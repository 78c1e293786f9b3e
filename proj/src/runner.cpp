#include "kpeval/runner.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

namespace kpeval {

namespace {

// Runs fn(0..count-1) on `threads` workers; rethrows the first failure in
// job-index order so error reporting does not depend on scheduling.
void run_jobs(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }

  std::vector<std::exception_ptr> failures(count);
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back(worker);
  }
  for (auto& thread : pool) {
    thread.join();
  }
  for (const auto& failure : failures) {
    if (failure) {
      std::rethrow_exception(failure);
    }
  }
}

std::string out_path(const std::string& out_dir, const std::string& name) {
  return (std::filesystem::path(out_dir) / name).string();
}

}  // namespace

void validate(const RunConfig& run) {
  validate(run.criterion);
  if (!(run.ratio_threshold > 0.0 && run.ratio_threshold < 1.0)) {
    throw InvalidParameter("ratio threshold must lie in (0,1)");
  }
  if (run.jobs < 1) {
    throw InvalidParameter("jobs must be at least 1");
  }
  if (run.synth_factor < 1) {
    throw InvalidParameter("synthetic duplication factor must be at least 1");
  }
  for (const auto& cfg : run.mask_overrides) {
    validate(cfg);
  }
}

DescriptorMaskConfig resolve_mask_config(const RunConfig& run,
                                         const ManifestDetector& detector) {
  DescriptorMaskConfig cfg;
  bool found = false;
  for (const auto& override_cfg : run.mask_overrides) {
    if (override_cfg.label == detector.label) {
      cfg = override_cfg;
      found = true;
      break;
    }
  }
  if (!found) {
    const auto builtin = mask_config_for(detector.label);
    if (!builtin) {
      throw InvalidParameter("no descriptor mask configuration for detector '" +
                             detector.label + "' (use a --mask override)");
    }
    cfg = *builtin;
  }
  // A size column stored as s = 4*sigma was shrunk at parse time; grow the
  // mask multiples accordingly so the pixel footprint stays put.
  if (detector.size_is_brisk_s) {
    cfg = cfg.scaled(4.0);
  }
  return cfg;
}

std::vector<PairEvaluation> evaluate_sequence(const RunConfig& run) {
  validate(run);
  const SequenceManifest manifest = parse_manifest(run.manifest_path);

  struct DetectorContext {
    ManifestDetector detector;
    DescriptorMaskConfig mask_cfg;
    DetectionSet reference;
  };
  std::vector<DetectorContext> contexts;
  contexts.reserve(manifest.detectors.size());
  for (const auto& detector : manifest.detectors) {
    DetectorContext ctx;
    ctx.detector = detector;
    ctx.mask_cfg = resolve_mask_config(run, detector);
    ctx.reference =
        parse_region_file(resolve_path(manifest, manifest.regions.at(detector.label)
                                                     .at(manifest.reference)),
                          {detector.size_is_brisk_s});
    ctx.reference.detector_label = detector.label;
    const auto dims = manifest.dimensions.at(manifest.reference);
    ctx.reference.image_domain = DomainRect(dims.first, dims.second);
    if (run.synth_factor >= 2) {
      ctx.reference = duplicate_set(ctx.reference, run.synth_factor);
    }
    contexts.push_back(std::move(ctx));
  }

  const int pairs_per_detector = static_cast<int>(manifest.test_images.size());
  const int job_count = static_cast<int>(contexts.size()) * pairs_per_detector;
  std::vector<PairEvaluation> results(job_count);

  run_jobs(job_count, run.jobs, [&](int job) {
    const DetectorContext& ctx = contexts[job / pairs_per_detector];
    const std::string& test_id = manifest.test_images[job % pairs_per_detector];
    try {
      DetectionSet test_set = parse_region_file(
          resolve_path(manifest, manifest.regions.at(ctx.detector.label).at(test_id)),
          {ctx.detector.size_is_brisk_s});
      test_set.detector_label = ctx.detector.label;
      const auto dims = manifest.dimensions.at(test_id);
      test_set.image_domain = DomainRect(dims.first, dims.second);
      if (run.synth_factor >= 2) {
        test_set = duplicate_set(test_set, run.synth_factor);
      }

      Homography h =
          parse_homography(resolve_path(manifest, manifest.homographies.at(test_id)));
      if (run.invert_homography) {
        h = h.inverse();
      }

      PairEvaluation eval =
          evaluate_pair(ctx.reference, test_set, h, run.criterion, ctx.mask_cfg,
                        run.with_matches, run.ratio_threshold);
      eval.detector = ctx.detector.label;
      eval.sequence = manifest.name;
      eval.ref_image = manifest.reference;
      eval.test_image = test_id;

      if (run.dump_coverage) {
        const CommonRegionFilter filter =
            filter_common_region(ctx.reference, test_set, h);
        const CoverageMap map =
            accumulate(filter.a.detections, ctx.mask_cfg, filter.omega);
        const std::string stem = "coverage_" + ctx.detector.label + "_" +
                                 manifest.reference + "-" + test_id;
        write_coverage_pgm(out_path(run.out_dir, stem + "_sum.pgm"), map.sum_field);
        write_coverage_pgm(out_path(run.out_dir, stem + "_max.pgm"), map.max_field);
      }

      results[job] = std::move(eval);
    } catch (const Error& e) {
      throw Error(e.category(), "detector '" + ctx.detector.label + "', pair " +
                                    manifest.reference + "-" + test_id + ": " + e.what());
    }
  });
  return results;
}

namespace {

std::vector<MetricRow> metric_rows(const std::vector<PairEvaluation>& evals,
                                   double (*pick)(const PairEvaluation&)) {
  std::vector<MetricRow> rows;
  rows.reserve(evals.size());
  for (const auto& eval : evals) {
    rows.push_back({eval.detector, eval.sequence, eval.ref_image + "-" + eval.test_image,
                    pick(eval)});
  }
  return rows;
}

}  // namespace

void write_repeatability_reports(const std::vector<PairEvaluation>& evals,
                                 const std::string& out_dir) {
  write_metric_csv(out_path(out_dir, "detections_a.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) {
                     return static_cast<double>(e.count_a);
                   }));
  write_metric_csv(out_path(out_dir, "detections_b.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) {
                     return static_cast<double>(e.count_b);
                   }));
  write_metric_csv(out_path(out_dir, "repeatability.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) { return e.rep; }));
  write_metric_csv(out_path(out_dir, "nr_repeatability.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) { return e.nr_rep; }));
}

void write_nr_ratio_reports(const std::vector<PairEvaluation>& evals,
                            const std::string& out_dir) {
  write_metric_csv(out_path(out_dir, "nr_ratio_a.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) { return e.nr_ratio_a; }));
  write_metric_csv(out_path(out_dir, "nr_ratio_b.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) { return e.nr_ratio_b; }));
}

void write_matching_reports(const std::vector<PairEvaluation>& evals,
                            const std::string& out_dir) {
  write_metric_csv(out_path(out_dir, "matches_total.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) {
                     return static_cast<double>(e.matches.total);
                   }));
  write_metric_csv(out_path(out_dir, "matches_correct.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) {
                     return static_cast<double>(e.matches.correct);
                   }));
  write_metric_csv(out_path(out_dir, "matches_nr_correct.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) {
                     return e.matches.nr_correct;
                   }));
  write_metric_csv(out_path(out_dir, "matches_total_keypoints.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) {
                     return static_cast<double>(e.matches.total_keypoints);
                   }));
  write_metric_csv(out_path(out_dir, "matches_correct_keypoints.csv"),
                   metric_rows(evals, [](const PairEvaluation& e) {
                     return static_cast<double>(e.matches.correct_keypoints);
                   }));
}

std::vector<CurveRow> emit_curves(CriterionVariant variant,
                                  const std::vector<double>& epsilons,
                                  const std::vector<double>& radii, double kappa) {
  for (double eps : epsilons) {
    if (!(eps > 0.0 && eps < 1.0)) {
      throw InvalidParameter("epsilon values must lie in (0,1)");
    }
  }
  for (double r : radii) {
    if (!(r > 0.0)) {
      throw InvalidParameter("radii must be positive");
    }
  }
  std::vector<CurveRow> rows;
  rows.reserve(epsilons.size() * radii.size());
  for (double eps : epsilons) {
    CriterionConfig cfg;
    cfg.variant = variant;
    cfg.epsilon_overlap = eps;
    cfg.kappa = kappa;
    for (double r : radii) {
      rows.push_back({r, max_distance_curve(r, cfg), variant_name(variant), eps});
    }
  }
  return rows;
}

std::vector<SynthRow> run_synth_experiments(int pairs, int detections, std::uint64_t seed,
                                            const CriterionConfig& criterion, int factor) {
  if (pairs < 1) {
    throw InvalidParameter("need at least one synthetic pair");
  }
  const DescriptorMaskConfig mask_cfg = *mask_config_for("SIFT");
  std::vector<SynthRow> rows;
  for (int p = 0; p < pairs; ++p) {
    const SyntheticPair pair = make_synthetic_pair(detections, 256, 256, seed + p);
    const DuplicationExperiment experiment =
        run_duplication_experiment(pair, criterion, mask_cfg, factor);
    rows.push_back({p, "rep", experiment.base.rep, experiment.duplicated.rep});
    rows.push_back({p, "nr_rep", experiment.base.nr_rep, experiment.duplicated.nr_rep});
    rows.push_back(
        {p, "nr_ratio", experiment.base.nr_ratio_a, experiment.duplicated.nr_ratio_a});
  }
  return rows;
}

void write_synth_csv(const std::string& path, const std::vector<SynthRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoFailure("cannot open '" + path + "' for writing");
  }
  out << "pair,metric,base,duplicated\n";
  char buffer[64];
  for (const auto& row : rows) {
    out << row.pair_index << ',' << row.metric << ',';
    std::snprintf(buffer, sizeof(buffer), "%.6g", row.base);
    out << buffer << ',';
    std::snprintf(buffer, sizeof(buffer), "%.6g", row.duplicated);
    out << buffer << '\n';
  }
  if (!out) {
    throw IoFailure("failed writing '" + path + "'");
  }
}

}  // namespace kpeval
