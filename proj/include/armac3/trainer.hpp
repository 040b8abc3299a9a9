#pragma once

// Optimizer, learning-rate schedule and the training loops for both modes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "armac3/augment.hpp"
#include "armac3/config.hpp"
#include "armac3/encoder.hpp"
#include "armac3/errors.hpp"
#include "armac3/graph.hpp"
#include "armac3/objectives.hpp"
#include "armac3/tensor.hpp"

namespace armac3 {

// lr0 * gamma^floor(t / step)
inline double step_lr(double lr0, double gamma, Index step_size, Index iteration) {
  if (step_size < 1) throw ConfigError("step_size must be >= 1");
  return lr0 * std::pow(gamma, static_cast<double>(iteration / step_size));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Adam with decoupled weight decay and bias correction.
class AdamW {
 public:
  AdamW() = default;

  AdamW(std::vector<NamedTensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
      v_.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    }
  }

  const AdamWConfig& config() const { return cfg_; }
  Index steps() const { return t_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  const Matrix& first_moment(std::size_t k) const { return m_[k]; }
  const Matrix& second_moment(std::size_t k) const { return v_[k]; }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  void step(double lr) {
    for (const auto& p : params_) {
      if (p.tensor.has_grad() && !p.tensor.grad().allFinite()) {
        throw NumericError("non-finite gradient in " + p.name + " at optimizer step " + std::to_string(t_ + 1));
      }
    }
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = params_[k].tensor;
      Matrix& x = p.mutable_value();
      if (p.has_grad()) {
        const Matrix& g = p.grad();
        m_[k] = b1 * m_[k] + (1.0 - b1) * g;
        v_[k] = b2 * v_[k] + (1.0 - b2) * g.cwiseProduct(g);
      } else {
        m_[k] *= b1;
        v_[k] *= b2;
      }
      if (cfg_.weight_decay != 0.0) x *= 1.0 - lr * cfg_.weight_decay;
      x.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + cfg_.eps);
    }
  }

 private:
  std::vector<NamedTensor> params_;
  AdamWConfig cfg_;
  std::vector<Matrix> m_, v_;
  Index t_ = 0;
};

struct HistoryRow {
  Index iteration = 0;
  LossBreakdown loss;
  double lr = 0;
};

struct TrainState {
  Index iteration = 0;
  Model model;
  EmaTeacher teacher;
  AdamW optimizer;
  double lr = 0;
  Rng rng;
  std::vector<HistoryRow> history;
};

// Supervision for the semi-supervised loop.
struct Supervision {
  const std::vector<int>* labels = nullptr;
  const NodeMask* mask = nullptr;
};

using IterationHook = std::function<void(const TrainState&)>;

struct TrainResult {
  Model model;
  EmaTeacher teacher;
  Matrix assignments;  // S on the un-augmented graph, evaluation mode
  Matrix embeddings;   // h on the un-augmented graph, evaluation mode
  std::vector<HistoryRow> history;
};

// Evaluation-mode forward pass on the full graph.
inline std::pair<Matrix, Matrix> evaluate_model(const SubjectGraph& g, const Matrix& x, Model& model) {
  GraphView view{g, Tensor(x)};
  Tensor h = encoder_forward(view, model.encoder, false);
  Tensor s = assign_clusters(h, model.predictor);
  return {h.value(), s.value()};
}

inline TrainState init_state(const RunConfig& cfg, Index in_dim, Index k) {
  cfg.validate();
  TrainState st;
  st.rng.seed(cfg.seed);
  st.model = Model::initialize(cfg.encoder_config(in_dim, k), st.rng);
  st.teacher = EmaTeacher(st.model.encoder, cfg.ema_momentum);
  st.optimizer = AdamW(st.model.named_parameters(),
                       {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay});
  st.lr = step_lr(cfg.lr, cfg.lr_gamma, cfg.step_size, 0);
  return st;
}

// One full-graph iteration: two views, online and teacher forwards, loss,
// backward, optimizer step, EMA update, scheduler tick.
inline LossBreakdown train_step(TrainState& st, const SubjectGraph& g, const Matrix& x, const RunConfig& cfg,
                                const Supervision& sup = {}) {
  const AugmentConfig aug = cfg.augment_config();
  GraphView v1 = sample_view(g, x, aug, st.rng);
  GraphView v2 = sample_view(g, x, aug, st.rng);

  Tensor h1 = encoder_forward(v1, st.model.encoder, true, &st.rng);
  Tensor h2 = encoder_forward(v2, st.model.encoder, true, &st.rng);
  Tensor z1 = encoder_forward(v1, st.teacher.params(), false);
  Tensor z2 = encoder_forward(v2, st.teacher.params(), false);
  Tensor s = assign_clusters(h1, st.model.predictor);

  LossTerms terms;
  terms.structural = cfg.struct_mode == StructMode::mincut
                         ? mincut_loss(s, v1.graph)
                         : struct_loss(s, g, StructMode::modularity, cfg.modularity_convention);
  terms.contrastive = merit_loss(h1, h2, z1, z2, cfg.beta, cfg.contrastive_temperature);
  if (cfg.mode == TrainMode::semi) {
    if (!sup.labels || !sup.mask) throw ContractError("semi-supervised step needs labels and a mask");
    terms.supervised = supervised_ce(s, *sup.labels, *sup.mask);
  }
  Tensor total = total_loss(cfg.mode, terms, cfg.lambda_con, cfg.lambda_struct);

  st.optimizer.zero_grad();
  backward(total);
  st.lr = step_lr(cfg.lr, cfg.lr_gamma, cfg.step_size, st.iteration);
  st.optimizer.step(st.lr);
  st.teacher.update(st.model.encoder);

  HistoryRow row{st.iteration, LossBreakdown::from(terms, total), st.lr};
  st.history.push_back(row);
  ++st.iteration;
  return row.loss;
}

inline TrainResult train(const SubjectGraph& g, const Matrix& x, const RunConfig& cfg, Index k,
                         const Supervision& sup = {}, const IterationHook& hook = {}) {
  if (x.rows() != g.num_nodes()) throw DimensionError("train: feature rows do not match graph");
  if (!(g.total_weight() > 0.0)) throw DataError("train: graph has no edges");
  TrainState st = init_state(cfg, x.cols(), k);
  for (Index it = 0; it < cfg.epochs; ++it) {
    train_step(st, g, x, cfg, sup);
    if (hook) hook(st);
  }
  TrainResult r;
  auto [h, s] = evaluate_model(g, x, st.model);
  r.embeddings = std::move(h);
  r.assignments = std::move(s);
  r.model = std::move(st.model);
  r.teacher = std::move(st.teacher);
  r.history = std::move(st.history);
  return r;
}

inline TrainResult train_unsupervised(const SubjectGraph& g, const Matrix& x, RunConfig cfg,
                                      const IterationHook& hook = {}) {
  cfg.mode = TrainMode::unsup;
  return train(g, x, cfg, cfg.k_clusters, {}, hook);
}

inline std::vector<int> argmax_rows(const Matrix& s) {
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Index i = 0; i < s.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < s.cols(); ++j) {
      if (s(i, j) > s(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

struct SemiResult {
  TrainResult train;
  std::vector<int> predictions;
  std::vector<double> scores;  // probability of the positive class
};

inline int class_count(const std::vector<int>& labels) {
  int c = 0;
  for (int y : labels) {
    if (y < 0) throw DataError("negative class label " + std::to_string(y));
    c = std::max(c, y + 1);
  }
  return c;
}

inline SemiResult train_semisupervised(const SubjectGraph& g, const Matrix& x, const std::vector<int>& labels,
                                       const NodeMask& mask, RunConfig cfg, int positive_class = 1,
                                       const IterationHook& hook = {}) {
  if (static_cast<Index>(labels.size()) != x.rows() || mask.size() != labels.size()) {
    throw DimensionError("train_semisupervised: labels/mask length must equal node count");
  }
  const int c = class_count(labels);
  if (c < 2) throw DataError("semi-supervised training needs at least two classes");
  std::vector<bool> seen(static_cast<std::size_t>(c), false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (mask[i]) seen[static_cast<std::size_t>(labels[i])] = true;
  }
  for (int k = 0; k < c; ++k) {
    if (!seen[static_cast<std::size_t>(k)]) {
      throw ContractError("class " + std::to_string(k) + " has no labeled node in the mask");
    }
  }
  if (positive_class < 0 || positive_class >= c) {
    throw ConfigError("positive_class " + std::to_string(positive_class) + " outside [0," + std::to_string(c) + ")");
  }
  cfg.mode = TrainMode::semi;
  SemiResult r;
  r.train = train(g, x, cfg, c, {&labels, &mask}, hook);
  r.predictions = argmax_rows(r.train.assignments);
  const Matrix& s = r.train.assignments;
  r.scores.resize(static_cast<std::size_t>(s.rows()));
  for (Index i = 0; i < s.rows(); ++i) r.scores[static_cast<std::size_t>(i)] = s(i, positive_class);
  return r;
}

// Stratified labeled masks: each fold labels round(fraction * n_c) nodes of
// every class c (at least one), drawn without replacement.
inline std::vector<NodeMask> make_splits(const std::vector<int>& labels, double fraction, Index n_folds,
                                         std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("labeled fraction must lie in (0,1]");
  if (n_folds < 1) throw ConfigError("n_folds must be >= 1");
  const int c = class_count(labels);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  std::vector<std::size_t> take(static_cast<std::size_t>(c));
  for (int k = 0; k < c; ++k) {
    const auto nk = members[static_cast<std::size_t>(k)].size();
    if (nk == 0) throw DataError("class " + std::to_string(k) + " has no members");
    if (fraction < 1.0 && nk < 2) {
      throw DataError("class " + std::to_string(k) + " has a single member; nothing would remain to evaluate");
    }
    const auto want = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(nk)));
    take[static_cast<std::size_t>(k)] = std::clamp<std::size_t>(want, 1, nk);
  }
  Rng rng(seed);
  std::vector<NodeMask> folds;
  for (Index f = 0; f < n_folds; ++f) {
    NodeMask mask(labels.size(), false);
    for (int k = 0; k < c; ++k) {
      auto idx = members[static_cast<std::size_t>(k)];
      // partial Fisher-Yates
      for (std::size_t j = 0; j < take[static_cast<std::size_t>(k)]; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, idx.size() - 1);
        std::swap(idx[j], idx[pick(rng)]);
        mask[idx[j]] = true;
      }
    }
    folds.push_back(std::move(mask));
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Training log

inline constexpr std::string_view kLogHeader = "iter,l_mod,l_collapse,l_struct,l1,l2,l_con,l_sup,total,lr";

inline void write_log_csv(std::ostream& os, const std::vector<HistoryRow>& rows, std::string_view echo = {}) {
  std::istringstream es{std::string(echo)};
  for (std::string line; std::getline(es, line);) os << "# " << line << '\n';
  os << kLogHeader << '\n';
  using detail::fmt;
  for (const auto& r : rows) {
    const auto& l = r.loss;
    os << r.iteration << ',' << fmt(l.l_mod) << ',' << fmt(l.l_collapse) << ',' << fmt(l.l_struct) << ','
       << fmt(l.l1) << ',' << fmt(l.l2) << ',' << fmt(l.l_con) << ',' << (l.l_sup ? fmt(*l.l_sup) : "nan") << ','
       << fmt(l.total) << ',' << fmt(r.lr) << '\n';
  }
}

}  // namespace armac3
