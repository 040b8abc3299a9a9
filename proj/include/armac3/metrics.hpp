#pragma once

// Evaluation: cluster/class alignment, binary classification metrics, ROC
// AUC, repeated-run statistics and the Wilcoxon signed-rank test.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "armac3/errors.hpp"

namespace armac3 {

// ---------------------------------------------------------------------------
// Label alignment

struct Alignment {
  std::vector<int> mapping;  // cluster id -> class id, -1 if the cluster is unmatched
  long matched = 0;

  int operator()(int cluster) const {
    return cluster >= 0 && cluster < static_cast<int>(mapping.size()) ? mapping[static_cast<std::size_t>(cluster)] : -1;
  }

  std::vector<int> apply(const std::vector<int>& pred) const {
    std::vector<int> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out[i] = (*this)(pred[i]);
    return out;
  }
};

namespace detail {

// Contingency table counts[cluster][class].
inline std::vector<std::vector<long>> contingency(const std::vector<int>& pred, const std::vector<int>& truth,
                                                  int k, int c) {
  std::vector<std::vector<long>> t(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(c), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++t[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(truth[i])];
  }
  return t;
}

// Maximum-weight assignment on a square matrix (Hungarian algorithm, O(m^3)).
// Returns row -> column.
inline std::vector<int> hungarian_max(const std::vector<std::vector<long>>& w) {
  const int m = static_cast<int>(w.size());
  long big = 0;
  for (const auto& row : w) for (long v : row) big = std::max(big, v);
  // Minimize cost = big - weight. 1-based potentials, classic formulation.
  std::vector<long> u(static_cast<std::size_t>(m + 1), 0), v(static_cast<std::size_t>(m + 1), 0);
  std::vector<int> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (int i = 1; i <= m; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<long> minv(static_cast<std::size_t>(m + 1), std::numeric_limits<long>::max());
    std::vector<bool> used(static_cast<std::size_t>(m + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      long delta = std::numeric_limits<long>::max();
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const long cost = big - w[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)];
        const long cur = cost - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(m), -1);
  for (int j = 1; j <= m; ++j) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

inline std::vector<std::vector<long>> pad_square(const std::vector<std::vector<long>>& t, int k, int c) {
  const int m = std::max(k, c);
  std::vector<std::vector<long>> sq(static_cast<std::size_t>(m), std::vector<long>(static_cast<std::size_t>(m), 0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < c; ++j) sq[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return sq;
}

}  // namespace detail

// Optimal one-to-one mapping of cluster ids to class ids maximizing the
// number of agreeing nodes. Up to 8 labels per side the permutations are
// enumerated in lexicographic order and the first maximum wins, so ties go to
// the lowest-index mapping; larger problems use the Hungarian algorithm.
inline Alignment align_labels(const std::vector<int>& pred, const std::vector<int>& truth, int num_clusters = 0,
                              int num_classes = 0) {
  if (pred.empty()) throw ContractError("align_labels: empty input");
  if (pred.size() != truth.size()) throw ContractError("align_labels: length mismatch");
  for (int p : pred) {
    if (p < 0) throw ContractError("align_labels: negative cluster id");
    num_clusters = std::max(num_clusters, p + 1);
  }
  for (int t : truth) {
    if (t < 0) throw ContractError("align_labels: negative class id");
    num_classes = std::max(num_classes, t + 1);
  }
  const auto table = detail::contingency(pred, truth, num_clusters, num_classes);
  const int m = std::max(num_clusters, num_classes);
  const auto sq = detail::pad_square(table, num_clusters, num_classes);

  std::vector<int> best;
  if (m <= 8) {
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    long best_score = -1;
    do {
      long score = 0;
      for (int i = 0; i < m; ++i) score += sq[static_cast<std::size_t>(i)][static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
      if (score > best_score) {
        best_score = score;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    best = detail::hungarian_max(sq);
  }

  Alignment a;
  a.mapping.assign(static_cast<std::size_t>(num_clusters), -1);
  for (int i = 0; i < num_clusters; ++i) {
    const int cls = best[static_cast<std::size_t>(i)];
    if (cls < num_classes) {
      a.mapping[static_cast<std::size_t>(i)] = cls;
      a.matched += table[static_cast<std::size_t>(i)][static_cast<std::size_t>(cls)];
    }
  }
  return a;
}

// ---------------------------------------------------------------------------
// Classification metrics

struct EvalReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  std::optional<double> auc;
  std::vector<long> support;  // nodes per class within the evaluated subset
  std::vector<int> alignment;  // cluster -> class mapping used, empty if none
  bool zero_division = false;
};

// Binary metrics on the nodes selected by `mask` (all nodes when empty).
inline EvalReport classification_metrics(const std::vector<int>& pred, const std::vector<int>& truth,
                                         int positive_class, const std::vector<bool>& mask = {}) {
  if (pred.size() != truth.size()) throw ContractError("classification_metrics: length mismatch");
  if (!mask.empty() && mask.size() != pred.size()) throw ContractError("classification_metrics: mask length mismatch");
  long tp = 0, fp = 0, fn = 0, total = 0, correct = 0;
  EvalReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    ++total;
    const int y = truth[i];
    if (y >= 0) {
      if (static_cast<std::size_t>(y) >= r.support.size()) r.support.resize(static_cast<std::size_t>(y) + 1, 0);
      ++r.support[static_cast<std::size_t>(y)];
    }
    if (pred[i] == y) ++correct;
    const bool p = pred[i] == positive_class;
    const bool t = y == positive_class;
    if (p && t) ++tp;
    else if (p && !t) ++fp;
    else if (!p && t) ++fn;
  }
  if (total == 0) throw ContractError("classification_metrics: no nodes selected");
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  else r.zero_division = true;
  if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  else r.zero_division = true;
  if (r.precision + r.recall > 0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

// ---------------------------------------------------------------------------
// ROC AUC

// Mann-Whitney form: probability that a random positive outscores a random
// negative, ties counted one half (midranks).
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth, int positive_class = 1,
                      const std::vector<bool>& mask = {}) {
  if (scores.size() != truth.size()) throw ContractError("roc_auc: length mismatch");
  std::vector<std::pair<double, bool>> items;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    items.emplace_back(scores[i], truth[i] == positive_class);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  long npos = 0, nneg = 0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].first == items[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].second) rank_sum += midrank;
    }
    i = j;
  }
  for (const auto& it : items) (it.second ? npos : nneg)++;
  if (npos == 0 || nneg == 0) throw ContractError("roc_auc: both classes must be present");
  const double u = rank_sum - static_cast<double>(npos) * static_cast<double>(npos + 1) / 2.0;
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

enum class Alternative { two_sided, greater };

inline Alternative parse_alternative(std::string_view s) {
  if (s == "two-sided") return Alternative::two_sided;
  if (s == "greater") return Alternative::greater;
  throw ConfigError("unknown alternative '" + std::string(s) + "' (expected two-sided|greater)");
}

struct SignedRanks {
  std::vector<double> ranks;  // midranks of |d|, zero differences dropped
  std::vector<bool> positive;
  double w_plus = 0.0;
  double tie_term = 0.0;  // sum over tie groups of t^3 - t
};

inline SignedRanks signed_ranks(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("wilcoxon: samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    if (x != 0.0) d.push_back(x);
  }
  if (d.empty()) throw DataError("wilcoxon: all differences are zero (degenerate comparison)");
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return std::abs(d[i]) < std::abs(d[j]); });
  SignedRanks sr;
  sr.ranks.resize(d.size());
  sr.positive.resize(d.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    const double t = static_cast<double>(j - i);
    sr.tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) sr.ranks[order[k]] = midrank;
    i = j;
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    sr.positive[i] = d[i] > 0;
    if (d[i] > 0) sr.w_plus += sr.ranks[i];
  }
  return sr;
}

// Exact null distribution of W+ over all 2^n equally likely sign patterns,
// accumulated over doubled (integer) midranks. Returns P(W+ >= w) and
// P(W+ <= w).
inline std::pair<double, double> wilcoxon_exact_tails(const SignedRanks& sr) {
  std::vector<long> twice;
  long total = 0;
  for (double r : sr.ranks) {
    twice.push_back(std::lround(2.0 * r));
    total += twice.back();
  }
  std::vector<double> count(static_cast<std::size_t>(total + 1), 0.0);
  count[0] = 1.0;
  long reach = 0;
  for (long r : twice) {
    for (long s = reach; s >= 0; --s) {
      if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
    }
    reach += r;
  }
  const long w = std::lround(2.0 * sr.w_plus);
  const double patterns = std::ldexp(1.0, static_cast<int>(sr.ranks.size()));
  double upper = 0.0, lower = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s >= w) upper += count[static_cast<std::size_t>(s)];
    if (s <= w) lower += count[static_cast<std::size_t>(s)];
  }
  return {upper / patterns, lower / patterns};
}

// Normal approximation with continuity and tie corrections.
inline double wilcoxon_normal_p(const SignedRanks& sr, Alternative alt) {
  const double n = static_cast<double>(sr.ranks.size());
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - sr.tie_term / 48.0;
  const double sd = std::sqrt(var);
  if (alt == Alternative::greater) {
    const double z = (sr.w_plus - mu - 0.5) / sd;
    return 0.5 * std::erfc(z / std::sqrt(2.0));
  }
  const double z = std::max(0.0, std::abs(sr.w_plus - mu) - 0.5) / sd;
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;
  std::size_t n = 0;  // nonzero differences
  bool exact = false;
};

inline constexpr std::size_t kWilcoxonExactLimit = 25;

// Tests whether a tends to exceed b (greater) or differs from b (two-sided).
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                           Alternative alt = Alternative::greater, bool force_normal = false) {
  const SignedRanks sr = signed_ranks(a, b);
  if (sr.ranks.size() < 5) {
    throw ContractError("wilcoxon: need at least 5 nonzero differences, got " + std::to_string(sr.ranks.size()));
  }
  WilcoxonResult r;
  r.w_plus = sr.w_plus;
  r.n = sr.ranks.size();
  if (!force_normal && r.n <= kWilcoxonExactLimit) {
    r.exact = true;
    auto [upper, lower] = wilcoxon_exact_tails(sr);
    r.p_value = alt == Alternative::greater ? upper : std::min(1.0, 2.0 * std::min(upper, lower));
  } else {
    r.p_value = wilcoxon_normal_p(sr, alt);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Repeated-run statistics

enum class StdConvention { sample, population };

inline StdConvention parse_std_convention(std::string_view s) {
  if (s == "sample") return StdConvention::sample;
  if (s == "population") return StdConvention::population;
  throw ConfigError("unknown std_convention '" + std::string(s) + "' (expected sample|population)");
}

inline std::string_view to_string(StdConvention c) { return c == StdConvention::sample ? "sample" : "population"; }

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs, StdConvention conv = StdConvention::sample) {
  if (xs.empty()) throw ContractError("mean_std: no values");
  // shifted by the first value so identical inputs give exactly zero spread
  const double x0 = xs.front();
  double sum = 0.0;
  for (double x : xs) sum += x - x0;
  const double shift = sum / static_cast<double>(xs.size());
  MeanStd m;
  m.mean = x0 + shift;
  if (xs.size() == 1) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - x0 - shift) * (x - x0 - shift);
  const double denom = conv == StdConvention::sample ? static_cast<double>(xs.size() - 1) : static_cast<double>(xs.size());
  m.std = std::sqrt(ss / denom);
  return m;
}

struct RunStatistics {
  MeanStd accuracy, precision, recall, f1;
  std::optional<MeanStd> auc;
  std::size_t count = 0;
};

inline RunStatistics aggregate_runs(const std::vector<EvalReport>& reports, StdConvention conv = StdConvention::sample) {
  if (reports.empty()) throw ContractError("aggregate_runs: no reports");
  auto collect = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(field(r));
    return mean_std(v, conv);
  };
  RunStatistics s;
  s.count = reports.size();
  s.accuracy = collect([](const EvalReport& r) { return r.accuracy; });
  s.precision = collect([](const EvalReport& r) { return r.precision; });
  s.recall = collect([](const EvalReport& r) { return r.recall; });
  s.f1 = collect([](const EvalReport& r) { return r.f1; });
  const bool all_auc = std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.auc.has_value(); });
  if (all_auc) s.auc = collect([](const EvalReport& r) { return *r.auc; });
  return s;
}

// ---------------------------------------------------------------------------
// Report CSV
//
//   # <config echo lines>
//   run,accuracy,precision,recall,f1,auc
//   0,<%.17g>,...
//   mean±std,0.950±0.010,...

inline constexpr std::string_view kReportHeader = "run,accuracy,precision,recall,f1,auc";
inline constexpr std::string_view kReportMetrics[] = {"accuracy", "precision", "recall", "f1", "auc"};

namespace detail {

inline std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string pm(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f±%.3f", m.mean, m.std);
  return buf;
}

}  // namespace detail

inline void write_report_csv(std::ostream& os, const std::vector<EvalReport>& rows, const RunStatistics& stats,
                             std::string_view echo = {}) {
  std::istringstream es{std::string(echo)};
  for (std::string line; std::getline(es, line);) os << "# " << line << '\n';
  os << kReportHeader << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i << ',' << detail::full(r.accuracy) << ',' << detail::full(r.precision) << ',' << detail::full(r.recall)
       << ',' << detail::full(r.f1) << ',' << (r.auc ? detail::full(*r.auc) : std::string("nan")) << '\n';
  }
  os << "mean±std," << detail::pm(stats.accuracy) << ',' << detail::pm(stats.precision) << ','
     << detail::pm(stats.recall) << ',' << detail::pm(stats.f1) << ','
     << (stats.auc ? detail::pm(*stats.auc) : std::string("nan")) << '\n';
}

// Per-run metric columns read back from a report CSV (summary and comment
// lines skipped). columns[m][run] follows kReportMetrics order.
inline std::vector<std::vector<double>> read_report_columns(std::istream& is, const std::string& source = "report") {
  std::vector<std::vector<double>> cols(std::size(kReportMetrics));
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kReportHeader) throw FormatError(source + ": unexpected header '" + line + "'");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    if (cell.empty() || !std::all_of(cell.begin(), cell.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      continue;
    }
    for (auto& col : cols) {
      if (!std::getline(ls, cell, ',')) throw FormatError(source + ": short row at line " + std::to_string(lineno));
      col.push_back(std::strtod(cell.c_str(), nullptr));
    }
  }
  if (!header) throw FormatError(source + ": missing header");
  return cols;
}

}  // namespace armac3
