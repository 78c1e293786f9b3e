#pragma once

#include <map>
#include <string>
#include <vector>

#include "kpeval/evaluation.hpp"

namespace kpeval {

/// Options applied while turning file rows into regions.
struct RegionFileOptions {
  /// The size column is a side length s = 4*sigma; shrink radii by 4 so the
  /// stored shape is expressed at scale sigma.
  bool size_is_brisk_s = false;
};

/// Parses a region file:
///   line 1: header (1.0 for plain regions, the descriptor length d when > 1)
///   line 2: detection count
///   then one detection per line, "u v a b c [d descriptor values]",
/// where a(x-u)^2 + 2b(x-u)(y-v) + c(y-v)^2 = 1 describes the ellipse, i.e.
/// [[a,b],[b,c]] is the inverse of the shape matrix. Rows with non-positive-
/// definite or degenerate coefficients (condition number > 1e8 or an
/// eigenvalue below 1e-12) are rejected.
DetectionSet parse_region_file(const std::string& path,
                               const RegionFileOptions& options = {});

/// Writes a set back in the same format (full double precision).
void write_region_file(const std::string& path, const DetectionSet& set);

/// Reads 9 whitespace-separated reals, row-major, and normalizes the matrix
/// so entry (3,3) equals 1.
Homography parse_homography(const std::string& path);

void write_homography(const std::string& path, const Homography& h);

/// Width and height from a PNM (P1..P6) header; pixels are never decoded.
std::pair<int, int> read_pnm_dimensions(const std::string& path);

struct ManifestDetector {
  std::string label;
  bool size_is_brisk_s = false;
};

/// A sequence to evaluate: one reference image and a list of test images,
/// each with a ground-truth homography, plus region files per detector.
///
/// Line-oriented text format ('#' starts a comment):
///   sequence <name>                      (optional; defaults to the file stem)
///   reference <image-id>
///   image <image-id> <width> <height>    (or: image <image-id> <pnm-path>)
///   homography <image-id> <path>         (maps <image-id> frame -> reference frame)
///   detector <label> [size_is_brisk_s]   (optional; declares per-detector flags)
///   regions <label> <image-id> <path>
struct SequenceManifest {
  std::string name;
  std::string reference;
  std::vector<std::string> test_images;                       // manifest order
  std::map<std::string, std::pair<int, int>> dimensions;      // id -> (w, h)
  std::map<std::string, std::string> homographies;            // test id -> path
  std::vector<ManifestDetector> detectors;                    // manifest order
  std::map<std::string, std::map<std::string, std::string>> regions;  // label -> id -> path
  std::string base_dir;  // directory of the manifest; relative paths resolve here
};

SequenceManifest parse_manifest(const std::string& path);

/// Resolves a possibly relative path against the manifest directory.
std::string resolve_path(const SequenceManifest& manifest, const std::string& path);

/// One row of a metric CSV.
struct MetricRow {
  std::string detector;
  std::string sequence;
  std::string pair;  // "<reference>-<test>"
  double value = 0.0;
};

/// Writes "detector,sequence,pair,value" rows (RFC-4180 quoting, LF endings,
/// 6 significant digits).
void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows);

/// Reads a metric CSV written by write_metric_csv.
std::vector<MetricRow> read_metric_csv(const std::string& path);

/// Metric table for the cross-sequence summary: values(i, j) is detector i's
/// score on sequence j.
struct MetricTable {
  std::vector<std::string> detectors;
  std::vector<std::string> sequences;
  Eigen::MatrixXd values;
};

/// Builds a detector x sequence table by averaging rows over image pairs.
/// Every detector must appear in every sequence.
MetricTable aggregate_rows(const std::vector<MetricRow>& rows);

/// Per sequence, rescales the detector scores to [0,1] (an all-equal column
/// maps to 0.5 everywhere), then averages across sequences per detector.
/// Throws InsufficientDetectors when a sequence has fewer than two detectors.
std::vector<std::pair<std::string, double>> summarize_normalized(const MetricTable& table);

/// 16-bit plain-text PGM (P2) of a field, linearly scaled to [0, 65535].
/// The factor field_value = pixel * scale is written to "<path>.scale.txt".
void write_coverage_pgm(const std::string& path, const Eigen::ArrayXXd& field);

/// Curve samples for the tolerated-distance plots.
struct CurveRow {
  double radius = 0.0;
  double d_max = 0.0;
  std::string variant;
  double epsilon = 0.0;
};

void write_curves_csv(const std::string& path, const std::vector<CurveRow>& rows);

std::string variant_name(CriterionVariant variant);
CriterionVariant variant_from_name(const std::string& name);

}  // namespace kpeval
