#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kpeval/runner.hpp"

namespace {

using namespace kpeval;

struct CliOptions {
  RunConfig run;
  std::string variant = "original";
  std::string synth;  // "det2", "det3", ... or a plain integer
  std::vector<std::string> mask_specs;
};

// "LABEL:rho:zeta" with zeta = "inf" for flat masks.
DescriptorMaskConfig parse_mask_spec(const std::string& spec) {
  const auto first = spec.find(':');
  const auto second = spec.find(':', first + 1);
  if (first == std::string::npos || second == std::string::npos) {
    throw InvalidParameter("mask override must look like LABEL:rho:zeta, got '" + spec + "'");
  }
  DescriptorMaskConfig cfg;
  cfg.label = spec.substr(0, first);
  try {
    cfg.rho = std::stod(spec.substr(first + 1, second - first - 1));
    const std::string zeta = spec.substr(second + 1);
    cfg.zeta = (zeta == "inf") ? std::numeric_limits<double>::infinity() : std::stod(zeta);
  } catch (const std::exception&) {
    throw InvalidParameter("cannot parse mask override '" + spec + "'");
  }
  validate(cfg);
  return cfg;
}

int parse_synth_factor(const std::string& text) {
  std::string digits = text;
  if (digits.rfind("det", 0) == 0) {
    digits = digits.substr(3);
  }
  try {
    const int factor = std::stoi(digits);
    if (factor < 2) {
      throw std::invalid_argument(digits);
    }
    return factor;
  } catch (const std::exception&) {
    throw InvalidParameter("--synth expects det<N> or an integer >= 2, got '" + text + "'");
  }
}

void add_shared_options(CLI::App* cmd, CliOptions& options, bool with_manifest) {
  if (with_manifest) {
    cmd->add_option("-m,--manifest", options.run.manifest_path, "sequence manifest file")
        ->required();
    cmd->add_option("-j,--jobs", options.run.jobs, "worker threads for pair jobs")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--invert-homography", options.run.invert_homography,
                  "dataset homographies map the reference frame to the test frame");
    cmd->add_option("--mask", options.mask_specs,
                    "descriptor mask override, LABEL:rho:zeta (zeta may be 'inf')");
  }
  cmd->add_option("--variant", options.variant, "repeatability criterion")
      ->check(CLI::IsMember({"original", "normalized", "code"}));
  cmd->add_option("-e,--epsilon", options.run.criterion.epsilon_overlap,
                  "maximum tolerated overlap error")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("-k,--kappa", options.run.criterion.kappa,
                  "normalized radii geometric mean, pixels")
      ->check(CLI::PositiveNumber);
  cmd->add_option("-o,--out", options.run.out_dir, "output directory")
      ->envname("KPEVAL_OUT");
}

void finalize(CliOptions& options) {
  options.run.criterion.variant = variant_from_name(options.variant);
  for (const auto& spec : options.mask_specs) {
    options.run.mask_overrides.push_back(parse_mask_spec(spec));
  }
  if (!options.synth.empty()) {
    options.run.synth_factor = parse_synth_factor(options.synth);
  }
  std::filesystem::create_directories(options.run.out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypoint detector evaluation: repeatability, redundancy-aware "
               "repeatability and descriptor matching over homography-related pairs"};
  app.require_subcommand(1);

  CliOptions options;
  std::string summary_input;
  std::vector<double> curve_epsilons = {0.05, 0.20, 0.40, 0.60};
  std::vector<double> curve_radii = {1, 2, 5, 10, 20, 30, 50, 100};
  int synth_pairs = 10;
  int synth_detections = 40;
  std::uint64_t synth_seed = 1;
  int synth_factor = 2;

  CLI::App* repeat = app.add_subcommand(
      "repeat", "repeatability and non-redundant repeatability per image pair");
  add_shared_options(repeat, options, true);
  repeat->add_option("--synth", options.synth,
                     "duplicate every detection set (det2, det3, ... or an integer)");

  CLI::App* nrratio = app.add_subcommand(
      "nr-ratio", "non-redundant detection ratio per image pair");
  add_shared_options(nrratio, options, true);
  nrratio->add_flag("--dump-coverage", options.run.dump_coverage,
                    "write the coverage maps as 16-bit plain PGM files");

  CLI::App* match = app.add_subcommand(
      "match-eval", "descriptor matching with the distance ratio test");
  add_shared_options(match, options, true);
  match->add_option("-r,--ratio-threshold", options.run.ratio_threshold,
                    "nearest-neighbor distance ratio threshold")
      ->check(CLI::Range(0.0, 1.0));

  CLI::App* summary = app.add_subcommand(
      "summary", "cross-sequence [0,1]-rescaled mean of a metric CSV");
  summary->add_option("-i,--input", summary_input, "metric CSV to summarize")->required();
  summary->add_option("-o,--out", options.run.out_dir, "output directory")
      ->envname("KPEVAL_OUT");

  CLI::App* curves = app.add_subcommand(
      "curves", "maximum tolerated distance between equal disks vs. radius");
  add_shared_options(curves, options, false);
  curves->add_option("--epsilons", curve_epsilons, "overlap error tolerances");
  curves->add_option("--radii", curve_radii, "disk radii, pixels");

  CLI::App* synth = app.add_subcommand(
      "synth", "randomized duplication bias experiment on synthetic pairs");
  add_shared_options(synth, options, false);
  synth->add_option("--pairs", synth_pairs, "synthetic pairs to evaluate")
      ->check(CLI::PositiveNumber);
  synth->add_option("--detections", synth_detections, "detections per image")
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "base random seed");
  synth->add_option("--factor", synth_factor, "duplication factor")
      ->check(CLI::Range(2, 1000));

  CLI11_PARSE(app, argc, argv);

  try {
    finalize(options);

    if (repeat->parsed() || nrratio->parsed() || match->parsed()) {
      options.run.with_matches = match->parsed();
      const std::vector<PairEvaluation> evals = evaluate_sequence(options.run);
      if (repeat->parsed()) {
        write_repeatability_reports(evals, options.run.out_dir);
      } else if (nrratio->parsed()) {
        write_nr_ratio_reports(evals, options.run.out_dir);
      } else {
        write_matching_reports(evals, options.run.out_dir);
      }
      std::cout << "evaluated " << evals.size() << " detector/pair jobs\n";
    } else if (summary->parsed()) {
      const auto rows = read_metric_csv(summary_input);
      const auto means = summarize_normalized(aggregate_rows(rows));
      const std::string path =
          (std::filesystem::path(options.run.out_dir) / "summary.csv").string();
      std::ofstream out(path, std::ios::binary);
      if (!out) {
        throw IoFailure("cannot open '" + path + "' for writing");
      }
      out << "detector,score\n";
      char buffer[64];
      for (const auto& [detector, score] : means) {
        std::snprintf(buffer, sizeof(buffer), "%.6g", score);
        out << detector << ',' << buffer << '\n';
      }
      std::cout << "wrote " << path << "\n";
    } else if (curves->parsed()) {
      const auto rows = emit_curves(options.run.criterion.variant, curve_epsilons,
                                    curve_radii, options.run.criterion.kappa);
      const std::string path =
          (std::filesystem::path(options.run.out_dir) / "curves.csv").string();
      write_curves_csv(path, rows);
      std::cout << "wrote " << path << "\n";
    } else if (synth->parsed()) {
      const auto rows = run_synth_experiments(synth_pairs, synth_detections, synth_seed,
                                              options.run.criterion, synth_factor);
      const std::string path =
          (std::filesystem::path(options.run.out_dir) / "synth.csv").string();
      write_synth_csv(path, rows);
      std::cout << "wrote " << path << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
