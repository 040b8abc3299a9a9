#pragma once

// Loss terms: structural regularization (modularity + collapse, or the
// min-cut alternative), the two-branch contrastive objective, supervised
// cross-entropy, and the mode-specific totals.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "armac3/errors.hpp"
#include "armac3/graph.hpp"
#include "armac3/tensor.hpp"

namespace armac3 {

enum class StructMode { modularity, mincut };
enum class TrainMode { unsup, semi };

inline StructMode parse_struct_mode(std::string_view s) {
  if (s == "modularity") return StructMode::modularity;
  if (s == "mincut") return StructMode::mincut;
  throw ConfigError("unknown struct_mode '" + std::string(s) + "' (expected modularity|mincut)");
}

inline std::string_view to_string(StructMode m) { return m == StructMode::modularity ? "modularity" : "mincut"; }

inline TrainMode parse_train_mode(std::string_view s) {
  if (s == "unsup") return TrainMode::unsup;
  if (s == "semi") return TrainMode::semi;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected unsup|semi)");
}

inline std::string_view to_string(TrainMode m) { return m == TrainMode::unsup ? "unsup" : "semi"; }

inline ModularityConvention parse_modularity_convention(std::string_view s) {
  if (s == "newman") return ModularityConvention::newman;
  if (s == "doubled") return ModularityConvention::doubled;
  throw ConfigError("unknown modularity_convention '" + std::string(s) + "' (expected newman|doubled)");
}

inline std::string_view to_string(ModularityConvention c) {
  return c == ModularityConvention::newman ? "newman" : "doubled";
}

// ---------------------------------------------------------------------------
// Structural terms

inline Tensor modularity_loss(const Tensor& s, const SubjectGraph& g,
                              ModularityConvention convention = ModularityConvention::newman) {
  return -modularity_quadratic(g, s, convention) / null_model_divisor(convention, g.total_weight());
}

// (sqrt(K) / n) * |sum_i S_i| - 1: zero for balanced assignments,
// sqrt(K) - 1 when every node sits in one cluster.
inline Tensor collapse_loss(const Tensor& s) {
  if (s.rows() < 1) throw ContractError("collapse_loss: empty assignment");
  const double k = static_cast<double>(s.cols());
  const double n = static_cast<double>(s.rows());
  return frobenius_norm(column_sum(s)) * (std::sqrt(k) / n) - 1.0;
}

struct StructLoss {
  Tensor primary;    // modularity term, or the cut term in mincut mode
  Tensor balance;    // collapse term, or the orthogonality term in mincut mode
  Tensor total;
};

// -Tr(S^T A S) / Tr(S^T D S) + | S^T S / |S^T S|_F - I / sqrt(K) |_F
inline StructLoss mincut_loss(const Tensor& s, const SubjectGraph& g) {
  if (s.rows() != g.num_nodes()) throw DimensionError("mincut_loss: S rows do not match graph");
  auto a = std::make_shared<const SparseMatrix>(g.adjacency());
  Tensor num = sum(mul(s, spmm(a, s)));
  Tensor deg(Matrix(g.degrees()));
  Tensor den = sum(mul(square(s), deg));
  if (!(den.item() > 0.0)) throw NumericError("mincut_loss: Tr(S^T D S) is zero");
  Tensor cut = -(num / den);
  Tensor sts = matmul(transpose(s), s);
  const auto k = s.cols();
  Tensor eye(Matrix(Matrix::Identity(k, k) / std::sqrt(static_cast<double>(k))));
  Tensor ortho = frobenius_norm(sts / frobenius_norm(sts) - eye);
  return {cut, ortho, cut + ortho};
}

inline StructLoss struct_loss(const Tensor& s, const SubjectGraph& g, StructMode mode,
                              ModularityConvention convention = ModularityConvention::newman) {
  if (mode == StructMode::mincut) return mincut_loss(s, g);
  Tensor mod = modularity_loss(s, g, convention);
  Tensor col = collapse_loss(s);
  return {mod, col, mod + col};
}

// ---------------------------------------------------------------------------
// Contrastive terms. sim(.,.) is cosine similarity divided by temperature.

// -(1/n) sum_i log( e^{sim(a_i,b_i)} / (e^{sim(a_i,b_i)} + sum_{j!=i} e^{sim(a_i,a_j)}) )
inline Tensor cross_view_loss(const Tensor& ha, const Tensor& hb, double temperature = 1.0) {
  if (ha.rows() != hb.rows() || ha.cols() != hb.cols()) throw DimensionError("cross_view_loss: shape mismatch");
  if (ha.rows() < 1) throw ContractError("cross_view_loss: empty batch");
  Tensor na = l2_normalize_rows(ha);
  Tensor nb = l2_normalize_rows(hb);
  Tensor positive = row_sum(na * nb) / temperature;
  Tensor intra = matmul(na, transpose(na)) / temperature;
  Tensor logits = set_diagonal(intra, positive);
  return mean(row_logsumexp(logits) - positive);
}

// -(1/n) sum_i log( e^{sim(a_i,z_i)} / sum_j e^{sim(a_i,z_j)} ); z is
// treated as a constant.
inline Tensor cross_network_loss(const Tensor& ha, const Tensor& zb, double temperature = 1.0) {
  if (ha.rows() != zb.rows() || ha.cols() != zb.cols()) throw DimensionError("cross_network_loss: shape mismatch");
  if (ha.rows() < 1) throw ContractError("cross_network_loss: empty batch");
  Tensor na = l2_normalize_rows(ha);
  Tensor nz = l2_normalize_rows(detach(zb));
  Tensor logits = matmul(na, transpose(nz)) / temperature;
  return mean(row_logsumexp(logits) - diagonal(logits));
}

struct MeritLoss {
  Tensor cross_view_12, cross_view_21;
  Tensor cross_net_12, cross_net_21;
  Tensor l1, l2, l_con;
};

inline MeritLoss merit_loss(const Tensor& h1, const Tensor& h2, const Tensor& z1, const Tensor& z2,
                            double beta, double temperature = 1.0) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
  MeritLoss m;
  m.cross_view_12 = cross_view_loss(h1, h2, temperature);
  m.cross_view_21 = cross_view_loss(h2, h1, temperature);
  m.cross_net_12 = cross_network_loss(h1, z2, temperature);
  m.cross_net_21 = cross_network_loss(h2, z1, temperature);
  m.l1 = m.cross_view_12 * beta + m.cross_net_12 * (1.0 - beta);
  m.l2 = m.cross_view_21 * beta + m.cross_net_21 * (1.0 - beta);
  m.l_con = (m.l1 + m.l2) * 0.5;
  return m;
}

// ---------------------------------------------------------------------------
// Supervised term

using NodeMask = std::vector<bool>;

// -sum_{i in mask} log p(i, y_i), summed (not averaged) over labeled nodes.
inline Tensor supervised_ce(const Tensor& probs, const std::vector<int>& labels, const NodeMask& mask) {
  if (static_cast<Index>(labels.size()) != probs.rows() || mask.size() != labels.size()) {
    throw DimensionError("supervised_ce: labels/mask length must equal row count");
  }
  std::vector<std::pair<Index, Index>> entries;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const int y = labels[i];
    if (y < 0 || y >= probs.cols()) {
      throw ContractError("supervised_ce: label " + std::to_string(y) + " outside [0," +
                          std::to_string(probs.cols()) + ")");
    }
    entries.emplace_back(static_cast<Index>(i), y);
  }
  if (entries.empty()) throw ContractError("supervised_ce: labeled mask is empty");
  return -sum(log(pick(probs, std::move(entries))));
}

// ---------------------------------------------------------------------------
// Totals

struct LossTerms {
  StructLoss structural;
  MeritLoss contrastive;
  std::optional<Tensor> supervised;
};

// unsup: L_struct + lambda_con L_con
// semi:  lambda_con L_con + L_sup + lambda_struct L_struct
inline Tensor total_loss(TrainMode mode, const LossTerms& parts, double lambda_con, double lambda_struct = 1.0) {
  if (mode == TrainMode::unsup) {
    return parts.structural.total + parts.contrastive.l_con * lambda_con;
  }
  if (!parts.supervised) throw ContractError("semi-supervised total requires a supervised term");
  return parts.contrastive.l_con * lambda_con + *parts.supervised + parts.structural.total * lambda_struct;
}

// Scalar snapshot of one iteration's objective.
struct LossBreakdown {
  double l_mod = 0, l_collapse = 0, l_struct = 0;
  double l_cross_view_12 = 0, l_cross_view_21 = 0, l_cross_net_12 = 0, l_cross_net_21 = 0;
  double l1 = 0, l2 = 0, l_con = 0;
  std::optional<double> l_sup;
  double total = 0;

  static LossBreakdown from(const LossTerms& t, const Tensor& total) {
    LossBreakdown b;
    b.l_mod = t.structural.primary.item();
    b.l_collapse = t.structural.balance.item();
    b.l_struct = t.structural.total.item();
    b.l_cross_view_12 = t.contrastive.cross_view_12.item();
    b.l_cross_view_21 = t.contrastive.cross_view_21.item();
    b.l_cross_net_12 = t.contrastive.cross_net_12.item();
    b.l_cross_net_21 = t.contrastive.cross_net_21.item();
    b.l1 = t.contrastive.l1.item();
    b.l2 = t.contrastive.l2.item();
    b.l_con = t.contrastive.l_con.item();
    if (t.supervised) b.l_sup = t.supervised->item();
    b.total = total.item();
    return b;
  }
};

}  // namespace armac3
