#pragma once

// Node feature inputs: ROI histogram descriptors, CSV ingestion, and a
// planted-partition synthetic generator.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "armac3/errors.hpp"
#include "armac3/graph.hpp"
#include "armac3/tensor.hpp"

namespace armac3 {

struct FeatureMatrix {
  Matrix values;
  std::optional<std::vector<int>> labels;
  std::vector<std::string> subject_ids;  // empty when the source had none

  Index n() const { return values.rows(); }
  Index d() const { return values.cols(); }

  int num_classes() const {
    if (!labels) return 0;
    return labels->empty() ? 0 : *std::max_element(labels->begin(), labels->end()) + 1;
  }

  void validate() const {
    if (!values.allFinite()) throw DataError("feature matrix contains NaN or Inf");
    if (!subject_ids.empty() && static_cast<Index>(subject_ids.size()) != n()) {
      throw DataError("subject id count does not match row count");
    }
    if (!labels) return;
    if (static_cast<Index>(labels->size()) != n()) {
      throw DataError("label count " + std::to_string(labels->size()) + " != row count " +
                      std::to_string(n()));
    }
    const int c = num_classes();
    std::vector<int> count(static_cast<std::size_t>(std::max(c, 0)), 0);
    for (int y : *labels) {
      if (y < 0) throw DataError("negative class label " + std::to_string(y));
      ++count[static_cast<std::size_t>(y)];
    }
    for (int k = 0; k < c; ++k) {
      if (count[static_cast<std::size_t>(k)] == 0) {
        throw DataError("class " + std::to_string(k) + " has no members");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// ROI histograms

struct RoiVoxelDump {
  std::vector<std::string> subjects;
  // values[subject][roi] = voxel samples in [0,1]
  std::vector<std::vector<std::vector<double>>> values;

  std::size_t num_rois() const { return values.empty() ? 0 : values.front().size(); }
};

// Bin index for v in [0,1] with q equal-width bins; 1.0 falls in the last bin.
inline std::size_t histogram_bin(double v, std::size_t q) {
  auto b = static_cast<std::size_t>(std::floor(v * static_cast<double>(q)));
  return std::min(b, q - 1);
}

inline FeatureMatrix roi_histogram_features(const RoiVoxelDump& dump, std::size_t q) {
  if (q < 1) throw ConfigError("histogram bin count must be >= 1");
  const std::size_t p = dump.num_rois();
  if (p == 0) throw DataError("ROI dump has no regions");
  const auto n = static_cast<Index>(dump.values.size());
  FeatureMatrix fm;
  fm.values = Matrix::Zero(n, static_cast<Index>(p * q));
  fm.subject_ids = dump.subjects;
  for (Index s = 0; s < n; ++s) {
    const auto& rois = dump.values[static_cast<std::size_t>(s)];
    const std::string who = static_cast<std::size_t>(s) < dump.subjects.size()
                                ? dump.subjects[static_cast<std::size_t>(s)]
                                : std::to_string(s);
    if (rois.size() != p) {
      throw DataError("subject " + who + " reports " + std::to_string(rois.size()) +
                      " ROIs, expected " + std::to_string(p));
    }
    for (std::size_t r = 0; r < p; ++r) {
      const auto& voxels = rois[r];
      if (voxels.empty()) throw DataError("subject " + who + " ROI " + std::to_string(r) + " is empty");
      std::vector<std::size_t> counts(q, 0);
      for (double v : voxels) {
        if (!(v >= 0.0 && v <= 1.0)) {
          throw DataError("subject " + who + " ROI " + std::to_string(r) + " value outside [0,1]");
        }
        ++counts[histogram_bin(v, q)];
      }
      const double k = static_cast<double>(voxels.size());
      for (std::size_t b = 0; b < q; ++b) {
        fm.values(s, static_cast<Index>(r * q + b)) = static_cast<double>(counts[b]) / k;
      }
    }
  }
  return fm;
}

// One file per subject; each line "roi_index<TAB>value". The ROI count is one
// past the largest index seen across all subjects.
inline RoiVoxelDump read_roi_dump(const std::vector<std::filesystem::path>& files) {
  RoiVoxelDump dump;
  std::vector<std::map<long, std::vector<double>>> per_subject;
  long max_roi = -1;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ROI dump " + path.string());
    std::map<long, std::vector<double>> rois;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      long roi = 0;
      double v = 0.0;
      std::string rest;
      if (!(ls >> roi >> v) || (ls >> rest) || roi < 0) {
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'roi_index<TAB>value'");
      }
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": value outside [0,1]");
      }
      rois[roi].push_back(v);
      max_roi = std::max(max_roi, roi);
    }
    dump.subjects.push_back(path.stem().string());
    per_subject.push_back(std::move(rois));
  }
  for (std::size_t s = 0; s < per_subject.size(); ++s) {
    std::vector<std::vector<double>> rois(static_cast<std::size_t>(max_roi + 1));
    for (auto& [idx, vals] : per_subject[s]) rois[static_cast<std::size_t>(idx)] = std::move(vals);
    dump.values.push_back(std::move(rois));
  }
  return dump;
}

// ---------------------------------------------------------------------------
// CSV features / labels

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t\r");
    const auto e = c.find_last_not_of(" \t\r");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

inline bool parse_int(const std::string& s, long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtol(s.c_str(), &end, 10);
  return end == s.c_str() + s.size();
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Plain comma-separated numbers. A first row containing any non-numeric cell
// is a header. A header whose first cell is "subject_id" marks the first
// column as string identifiers.
inline FeatureMatrix parse_features_csv(std::istream& in, const std::string& source = "features") {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  bool has_ids = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_csv(line);
    if (first) {
      first = false;
      bool numeric = true;
      double tmp = 0.0;
      for (const auto& c : cells) numeric = numeric && detail::parse_double(c, tmp);
      if (!numeric) {
        has_ids = !cells.empty() && cells[0] == "subject_id";
        continue;
      }
    }
    std::size_t start = 0;
    if (has_ids) {
      ids.push_back(cells.empty() ? std::string() : cells[0]);
      start = 1;
    }
    std::vector<double> row;
    for (std::size_t c = start; c < cells.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v)) {
        throw DataError(source + ": line " + std::to_string(lineno) + ", column " +
                        std::to_string(c + 1) + ": non-numeric cell '" + cells[c] + "'");
      }
      if (!std::isfinite(v)) {
        throw DataError(source + ": line " + std::to_string(lineno) + ", column " +
                        std::to_string(c + 1) + ": non-finite value");
      }
      row.push_back(v);
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw DataError(source + ": line " + std::to_string(lineno) + " has " +
                      std::to_string(row.size()) + " columns, expected " + std::to_string(width));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty() || width == 0) throw DataError(source + ": no data rows");
  FeatureMatrix fm;
  fm.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      fm.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  fm.subject_ids = std::move(ids);
  return fm;
}

// One label per line: either "<int>" (row order) or "<subject_id>,<int>"
// (joined by identifier).
inline void attach_labels(FeatureMatrix& fm, std::istream& in, const std::string& source = "labels") {
  std::vector<int> by_row;
  std::map<std::string, int> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = detail::split_csv(line);
    long y = 0;
    if (cells.size() == 1 && detail::parse_int(cells[0], y)) {
      by_row.push_back(static_cast<int>(y));
    } else if (cells.size() == 2 && detail::parse_int(cells[1], y)) {
      by_id[cells[0]] = static_cast<int>(y);
    } else {
      throw DataError(source + ": line " + std::to_string(lineno) + ": expected an integer label");
    }
  }
  if (!by_row.empty() && !by_id.empty()) throw DataError(source + ": mixes row-order and id labels");
  if (!by_id.empty()) {
    if (fm.subject_ids.empty()) throw DataError(source + ": id-keyed labels but features have no ids");
    std::vector<int> joined;
    for (const auto& id : fm.subject_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError(source + ": no label for subject " + id);
      joined.push_back(it->second);
    }
    fm.labels = std::move(joined);
  } else {
    if (static_cast<Index>(by_row.size()) != fm.n()) {
      throw DataError(source + ": " + std::to_string(by_row.size()) + " labels for " +
                      std::to_string(fm.n()) + " rows");
    }
    fm.labels = std::move(by_row);
  }
}

inline FeatureMatrix load_features(const std::filesystem::path& path,
                                   const std::optional<std::filesystem::path>& labels_path = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open features file " + path.string());
  FeatureMatrix fm = parse_features_csv(in, path.string());
  if (labels_path) {
    std::ifstream lin(*labels_path);
    if (!lin) throw DataError("cannot open labels file " + labels_path->string());
    attach_labels(fm, lin, labels_path->string());
  }
  fm.validate();
  return fm;
}

inline void write_features_csv(std::ostream& os, const FeatureMatrix& fm) {
  const bool ids = !fm.subject_ids.empty();
  if (ids) {
    os << "subject_id";
    for (Index j = 0; j < fm.d(); ++j) os << ",f" << j;
    os << '\n';
  }
  for (Index i = 0; i < fm.n(); ++i) {
    if (ids) os << fm.subject_ids[static_cast<std::size_t>(i)] << ',';
    for (Index j = 0; j < fm.d(); ++j) {
      if (j) os << ',';
      os << detail::format_double(fm.values(i, j));
    }
    os << '\n';
  }
}

inline void write_labels(std::ostream& os, const std::vector<int>& labels) {
  for (int y : labels) os << y << '\n';
}

// ---------------------------------------------------------------------------
// Planted-partition generator

struct SbmOptions {
  Index n = 60;
  int k = 2;
  double p_in = 0.8;
  double p_out = 0.05;
  Index feature_dim = 8;
  double noise_sigma = 0.3;
  double centroid_scale = 1.0;
  std::uint64_t seed = 7;
};

struct SbmSample {
  FeatureMatrix features;  // labels attached
  SubjectGraph planted;    // block-model edges drawn with p_in / p_out
};

// Block b owns centroid centroid_scale * e_(b mod feature_dim); node features
// are their block's centroid plus i.i.d. N(0, sigma^2) noise. Blocks are
// contiguous and near-equal in size.
inline SbmSample gen_sbm(const SbmOptions& o) {
  if (o.k < 2) throw ContractError("gen_sbm: K must be >= 2");
  if (o.n < 2 * o.k) throw ContractError("gen_sbm: n must be >= 2K");
  if (!(o.p_out >= 0.0 && o.p_out < o.p_in && o.p_in <= 1.0)) {
    throw ContractError("gen_sbm: require 0 <= p_out < p_in <= 1");
  }
  if (o.feature_dim < o.k) throw ContractError("gen_sbm: feature_dim must be >= K for orthogonal centroids");
  if (!(o.noise_sigma >= 0.0)) throw ContractError("gen_sbm: noise_sigma must be >= 0");

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<int> labels(static_cast<std::size_t>(o.n));
  for (Index i = 0; i < o.n; ++i) {
    labels[static_cast<std::size_t>(i)] = static_cast<int>((i * o.k) / o.n);
  }
  FeatureMatrix fm;
  fm.values = Matrix::Zero(o.n, o.feature_dim);
  for (Index i = 0; i < o.n; ++i) {
    fm.values(i, labels[static_cast<std::size_t>(i)]) = o.centroid_scale;
    for (Index j = 0; j < o.feature_dim; ++j) fm.values(i, j) += o.noise_sigma * noise(rng);
  }
  fm.labels = labels;

  std::vector<Edge> edges;
  for (Index i = 0; i < o.n; ++i) {
    for (Index j = i + 1; j < o.n; ++j) {
      const bool same = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)];
      if (coin(rng) < (same ? o.p_in : o.p_out)) edges.push_back({i, j, 1.0});
    }
  }
  return {std::move(fm), SubjectGraph(o.n, std::move(edges), 0.0)};
}

}  // namespace armac3
