#include "kpeval/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kpeval {

namespace {

constexpr double kMaxConditionNumber = 1e8;
constexpr double kMinEigenvalue = 1e-12;

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream stream(line);
  std::string token;
  while (stream >> token) {
    tokens.push_back(token);
  }
  return tokens;
}

double parse_double(const std::string& token, const std::string& path, int line_no) {
  try {
    size_t consumed = 0;
    const double value = std::stod(token, &consumed);
    if (consumed != token.size() || !std::isfinite(value)) {
      throw std::invalid_argument(token);
    }
    return value;
  } catch (const std::exception&) {
    throw NonNumericToken(path + ":" + std::to_string(line_no) + ": '" + token + "'");
  }
}

std::string format_significant(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF endings
  if (!out) {
    throw IoFailure("cannot open '" + path + "' for writing");
  }
  return out;
}

}  // namespace

DetectionSet parse_region_file(const std::string& path, const RegionFileOptions& options) {
  std::ifstream in(path);
  if (!in) {
    throw IoFailure("cannot open region file '" + path + "'");
  }

  std::string line;
  int line_no = 0;
  const auto next_content_line = [&](std::string& out) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!split_tokens(line).empty()) {
        out = line;
        return true;
      }
    }
    return false;
  };

  std::string header_line;
  if (!next_content_line(header_line)) {
    throw MalformedHeader(path + ": empty file");
  }
  const auto header_tokens = split_tokens(header_line);
  if (header_tokens.size() != 1) {
    throw MalformedHeader(path + ":1: expected a single header value");
  }
  const double header = parse_double(header_tokens[0], path, line_no);
  int descriptor_dim = 0;
  if (header == 1.0) {
    descriptor_dim = 0;
  } else if (header > 1.0 && header == std::floor(header)) {
    descriptor_dim = static_cast<int>(header);
  } else {
    throw MalformedHeader(path + ": header must be 1.0 or an integer descriptor length > 1");
  }

  std::string count_line;
  if (!next_content_line(count_line)) {
    throw MalformedHeader(path + ": missing detection count");
  }
  const auto count_tokens = split_tokens(count_line);
  if (count_tokens.size() != 1) {
    throw MalformedHeader(path + ": expected a single detection count");
  }
  const double count_value = parse_double(count_tokens[0], path, line_no);
  if (count_value < 0 || count_value != std::floor(count_value)) {
    throw MalformedHeader(path + ": detection count must be a nonnegative integer");
  }
  const int count = static_cast<int>(count_value);

  DetectionSet set;
  set.detections.reserve(count);
  if (descriptor_dim > 0) {
    set.descriptors.resize(count, descriptor_dim);
  }

  int rows = 0;
  std::string row_line;
  while (next_content_line(row_line)) {
    if (rows >= count) {
      throw CountMismatch(path + ": more rows than the declared count " +
                          std::to_string(count));
    }
    const auto tokens = split_tokens(row_line);
    const size_t expected = 5 + static_cast<size_t>(descriptor_dim);
    if (tokens.size() != expected) {
      throw NonNumericToken(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(expected) + " values, got " +
                            std::to_string(tokens.size()));
    }
    double values[5];
    for (int k = 0; k < 5; ++k) {
      values[k] = parse_double(tokens[k], path, line_no);
    }
    const double a = values[2];
    const double b = values[3];
    const double c = values[4];
    const double det = a * c - b * b;
    if (!(a > 0.0) || !(det > 0.0)) {
      throw NonPositiveDefinite(path + ":" + std::to_string(line_no) +
                                ": ellipse coefficients are not positive-definite");
    }

    Mat2 shape;
    shape << c / det, -b / det, -b / det, a / det;  // inverse of [[a,b],[b,c]]
    if (options.size_is_brisk_s) {
      shape /= 16.0;  // radii shrink by 4: s = 4*sigma
    }

    const double half_trace = 0.5 * (shape(0, 0) + shape(1, 1));
    const double shape_det = shape.determinant();
    const double disc = std::sqrt(std::max(0.0, half_trace * half_trace - shape_det));
    const double eig_min = half_trace - disc;
    const double eig_max = half_trace + disc;
    if (eig_min < kMinEigenvalue || eig_max / eig_min > kMaxConditionNumber) {
      throw NonPositiveDefinite(path + ":" + std::to_string(line_no) +
                                ": degenerate shape matrix");
    }

    set.detections.emplace_back(Vec2(values[0], values[1]), shape);
    for (int k = 0; k < descriptor_dim; ++k) {
      set.descriptors(rows, k) = parse_double(tokens[5 + k], path, line_no);
    }
    ++rows;
  }
  if (rows != count) {
    throw CountMismatch(path + ": declared " + std::to_string(count) + " rows, found " +
                        std::to_string(rows));
  }
  return set;
}

void write_region_file(const std::string& path, const DetectionSet& set) {
  std::ofstream out = open_output(path);
  const int dim = set.has_descriptors() ? static_cast<int>(set.descriptors.cols()) : 0;
  char buffer[64];
  const auto emit = [&](double v) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    out << buffer;
  };
  out << (dim > 0 ? std::to_string(dim) : std::string("1.0")) << "\n";
  out << set.detections.size() << "\n";
  for (size_t i = 0; i < set.detections.size(); ++i) {
    const auto& region = set.detections[i];
    const Mat2 conic = region.shape.inverse();
    emit(region.center.x());
    out << ' ';
    emit(region.center.y());
    out << ' ';
    emit(conic(0, 0));
    out << ' ';
    emit(0.5 * (conic(0, 1) + conic(1, 0)));
    out << ' ';
    emit(conic(1, 1));
    for (int k = 0; k < dim; ++k) {
      out << ' ';
      emit(set.descriptors(static_cast<Eigen::Index>(i), k));
    }
    out << "\n";
  }
  if (!out) {
    throw IoFailure("failed writing region file '" + path + "'");
  }
}

Homography parse_homography(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoFailure("cannot open homography file '" + path + "'");
  }
  std::vector<double> values;
  std::string token;
  int line_no = 1;
  while (in >> token) {
    values.push_back(parse_double(token, path, line_no));
  }
  if (values.size() != 9) {
    throw MalformedMatrix(path + ": expected 9 values, got " +
                          std::to_string(values.size()));
  }
  Mat3 m;
  m << values[0], values[1], values[2], values[3], values[4], values[5], values[6],
      values[7], values[8];
  try {
    return Homography(m);
  } catch (const Error& e) {
    throw Singular(path + ": " + e.what());
  }
}

void write_homography(const std::string& path, const Homography& h) {
  std::ofstream out = open_output(path);
  char buffer[64];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", h.matrix(r, c));
      out << buffer << (c == 2 ? "\n" : " ");
    }
  }
  if (!out) {
    throw IoFailure("failed writing homography file '" + path + "'");
  }
}

std::pair<int, int> read_pnm_dimensions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoFailure("cannot open image file '" + path + "'");
  }
  std::string magic;
  in >> magic;
  if (magic.size() != 2 || magic[0] != 'P' || magic[1] < '1' || magic[1] > '6') {
    throw MalformedHeader(path + ": not a PNM file");
  }
  const auto next_value = [&]() {
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
      if (c == '#') {
        while (c != EOF && c != '\n') c = in.get();
      }
      c = in.get();
    }
    std::string digits;
    while (c != EOF && std::isdigit(c)) {
      digits += static_cast<char>(c);
      c = in.get();
    }
    if (digits.empty()) {
      throw MalformedHeader(path + ": truncated PNM header");
    }
    return std::stoi(digits);
  };
  const int width = next_value();
  const int height = next_value();
  if (width < 1 || height < 1) {
    throw MalformedHeader(path + ": invalid PNM dimensions");
  }
  return {width, height};
}

SequenceManifest parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoFailure("cannot open manifest '" + path + "'");
  }
  SequenceManifest manifest;
  manifest.base_dir = std::filesystem::path(path).parent_path().string();
  manifest.name = std::filesystem::path(path).stem().string();

  const auto fail = [&](int line_no, const std::string& message) {
    throw ManifestError(path + ":" + std::to_string(line_no) + ": " + message);
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    auto tokens = split_tokens(line);
    if (tokens.empty()) {
      continue;
    }
    const std::string key = tokens[0];
    if (key == "sequence" && tokens.size() == 2) {
      manifest.name = tokens[1];
    } else if (key == "reference" && tokens.size() == 2) {
      manifest.reference = tokens[1];
    } else if (key == "image" && (tokens.size() == 3 || tokens.size() == 4)) {
      const std::string& id = tokens[1];
      if (manifest.dimensions.count(id)) {
        fail(line_no, "duplicate image id '" + id + "'");
      }
      std::pair<int, int> dims;
      if (tokens.size() == 4) {
        dims = {static_cast<int>(parse_double(tokens[2], path, line_no)),
                static_cast<int>(parse_double(tokens[3], path, line_no))};
      } else {
        const auto resolved =
            (std::filesystem::path(manifest.base_dir) / tokens[2]).string();
        dims = read_pnm_dimensions(resolved);
      }
      if (dims.first < 1 || dims.second < 1) {
        fail(line_no, "image dimensions must be at least 1x1");
      }
      manifest.dimensions[id] = dims;
    } else if (key == "homography" && tokens.size() == 3) {
      manifest.homographies[tokens[1]] = tokens[2];
      manifest.test_images.push_back(tokens[1]);
    } else if (key == "detector" && (tokens.size() == 2 || tokens.size() == 3)) {
      ManifestDetector detector{tokens[1], false};
      if (tokens.size() == 3) {
        if (tokens[2] != "size_is_brisk_s") {
          fail(line_no, "unknown detector flag '" + tokens[2] + "'");
        }
        detector.size_is_brisk_s = true;
      }
      manifest.detectors.push_back(detector);
    } else if (key == "regions" && tokens.size() == 4) {
      manifest.regions[tokens[1]][tokens[2]] = tokens[3];
      const bool declared =
          std::any_of(manifest.detectors.begin(), manifest.detectors.end(),
                      [&](const ManifestDetector& d) { return d.label == tokens[1]; });
      if (!declared) {
        manifest.detectors.push_back({tokens[1], false});
      }
    } else {
      fail(line_no, "unrecognized line '" + line + "'");
    }
  }

  if (manifest.reference.empty()) {
    throw ManifestError(path + ": missing 'reference' entry");
  }
  if (!manifest.dimensions.count(manifest.reference)) {
    throw ManifestError(path + ": reference image has no dimensions");
  }
  if (manifest.test_images.empty()) {
    throw ManifestError(path + ": no test images (missing 'homography' lines)");
  }
  for (const auto& id : manifest.test_images) {
    if (!manifest.dimensions.count(id)) {
      throw ManifestError(path + ": test image '" + id + "' has no dimensions");
    }
  }
  for (const auto& detector : manifest.detectors) {
    const auto it = manifest.regions.find(detector.label);
    if (it == manifest.regions.end() || !it->second.count(manifest.reference)) {
      throw ManifestError(path + ": detector '" + detector.label +
                          "' has no region file for the reference image");
    }
    for (const auto& id : manifest.test_images) {
      if (!it->second.count(id)) {
        throw ManifestError(path + ": detector '" + detector.label +
                            "' has no region file for image '" + id + "'");
      }
    }
  }
  return manifest;
}

std::string resolve_path(const SequenceManifest& manifest, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || manifest.base_dir.empty()) {
    return path;
  }
  return (std::filesystem::path(manifest.base_dir) / p).string();
}

void write_metric_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out = open_output(path);
  out << "detector,sequence,pair,value\n";
  for (const auto& row : rows) {
    out << csv_escape(row.detector) << ',' << csv_escape(row.sequence) << ','
        << csv_escape(row.pair) << ',' << format_significant(row.value) << '\n';
  }
  if (!out) {
    throw IoFailure("failed writing '" + path + "'");
  }
}

std::vector<MetricRow> read_metric_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoFailure("cannot open '" + path + "'");
  }
  std::vector<MetricRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line_no == 1) {
      continue;  // header
    }
    const auto fields = csv_split(line);
    if (fields.size() != 4) {
      throw NonNumericToken(path + ":" + std::to_string(line_no) +
                            ": expected 4 CSV fields");
    }
    rows.push_back({fields[0], fields[1], fields[2],
                    parse_double(fields[3], path, line_no)});
  }
  return rows;
}

MetricTable aggregate_rows(const std::vector<MetricRow>& rows) {
  MetricTable table;
  std::map<std::string, std::map<std::string, std::pair<double, int>>> sums;
  for (const auto& row : rows) {
    auto& cell = sums[row.detector][row.sequence];
    cell.first += row.value;
    cell.second += 1;
    if (std::find(table.detectors.begin(), table.detectors.end(), row.detector) ==
        table.detectors.end()) {
      table.detectors.push_back(row.detector);
    }
    if (std::find(table.sequences.begin(), table.sequences.end(), row.sequence) ==
        table.sequences.end()) {
      table.sequences.push_back(row.sequence);
    }
  }
  table.values.resize(static_cast<Eigen::Index>(table.detectors.size()),
                      static_cast<Eigen::Index>(table.sequences.size()));
  for (size_t i = 0; i < table.detectors.size(); ++i) {
    for (size_t j = 0; j < table.sequences.size(); ++j) {
      const auto det_it = sums.find(table.detectors[i]);
      const auto cell_it = det_it->second.find(table.sequences[j]);
      if (cell_it == det_it->second.end()) {
        throw InsufficientDetectors("detector '" + table.detectors[i] +
                                    "' has no rows for sequence '" + table.sequences[j] + "'");
      }
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cell_it->second.first / cell_it->second.second;
    }
  }
  return table;
}

std::vector<std::pair<std::string, double>> summarize_normalized(const MetricTable& table) {
  const Eigen::Index n_detectors = table.values.rows();
  const Eigen::Index n_sequences = table.values.cols();
  if (n_detectors < 2) {
    throw InsufficientDetectors("the rescaling needs at least two detectors per sequence");
  }
  if (n_sequences < 1) {
    throw InsufficientDetectors("no sequences to summarize");
  }

  Eigen::MatrixXd rescaled(n_detectors, n_sequences);
  for (Eigen::Index j = 0; j < n_sequences; ++j) {
    const double lo = table.values.col(j).minCoeff();
    const double hi = table.values.col(j).maxCoeff();
    if (hi > lo) {
      rescaled.col(j) = (table.values.col(j).array() - lo) / (hi - lo);
    } else {
      rescaled.col(j).setConstant(0.5);  // an all-equal column carries no ranking
    }
  }

  std::vector<std::pair<std::string, double>> means;
  means.reserve(static_cast<size_t>(n_detectors));
  for (Eigen::Index i = 0; i < n_detectors; ++i) {
    means.emplace_back(table.detectors[static_cast<size_t>(i)], rescaled.row(i).mean());
  }
  return means;
}

void write_coverage_pgm(const std::string& path, const Eigen::ArrayXXd& field) {
  const double peak = field.maxCoeff();
  const double scale = peak > 0.0 ? peak / 65535.0 : 1.0;

  std::ofstream out = open_output(path);
  out << "P2\n" << field.cols() << ' ' << field.rows() << "\n65535\n";
  for (Eigen::Index row = 0; row < field.rows(); ++row) {
    for (Eigen::Index col = 0; col < field.cols(); ++col) {
      const long value = std::lround(field(row, col) / scale);
      out << value << (col + 1 == field.cols() ? "\n" : " ");
    }
  }
  if (!out) {
    throw IoFailure("failed writing '" + path + "'");
  }

  std::ofstream sidecar = open_output(path + ".scale.txt");
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", scale);
  sidecar << buffer << "\n";
}

void write_curves_csv(const std::string& path, const std::vector<CurveRow>& rows) {
  std::ofstream out = open_output(path);
  out << "r,d_max,variant,epsilon\n";
  for (const auto& row : rows) {
    out << format_significant(row.radius) << ',' << format_significant(row.d_max) << ','
        << csv_escape(row.variant) << ',' << format_significant(row.epsilon) << '\n';
  }
  if (!out) {
    throw IoFailure("failed writing '" + path + "'");
  }
}

std::string variant_name(CriterionVariant variant) {
  switch (variant) {
    case CriterionVariant::Original: return "original";
    case CriterionVariant::Normalized: return "normalized";
    case CriterionVariant::CodeVariant: return "code";
  }
  return "original";
}

CriterionVariant variant_from_name(const std::string& name) {
  if (name == "original") return CriterionVariant::Original;
  if (name == "normalized") return CriterionVariant::Normalized;
  if (name == "code") return CriterionVariant::CodeVariant;
  throw InvalidParameter("unknown criterion variant '" + name + "'");
}

}  // namespace kpeval
