#pragma once

// ARMA graph encoder with batch normalization, dropout and a linear
// projection head; the cluster-assignment predictor; and the EMA teacher.

#include <cmath>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "armac3/checkpoint.hpp"
#include "armac3/errors.hpp"
#include "armac3/graph.hpp"
#include "armac3/tensor.hpp"

namespace armac3 {

using Rng = std::mt19937_64;

enum class Activation { relu, elu, selu, silu };

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "elu") return Activation::elu;
  if (name == "selu") return Activation::selu;
  if (name == "silu") return Activation::silu;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu|elu|selu|silu)");
}

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::selu: return "selu";
    case Activation::silu: return "silu";
  }
  return "?";
}

inline Tensor activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::relu: return relu(x);
    case Activation::elu: return elu(x);
    case Activation::selu: return selu(x);
    case Activation::silu: return silu(x);
  }
  throw ConfigError("unknown activation");
}

struct EncoderConfig {
  Index in_dim = 0;
  Index hidden_dim = 256;
  Index num_stacks = 1;
  Index num_layers = 1;
  Index k_clusters = 2;
  Index predictor_hidden = 0;  // 0: g is a single affine layer
  Activation activation = Activation::elu;
  double dropout = 0.2;
  bool self_loops = false;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  void validate() const {
    if (in_dim < 1 || hidden_dim < 1) throw ConfigError("encoder dimensions must be >= 1");
    if (num_stacks < 1 || num_layers < 1) throw ConfigError("num_stacks and num_layers must be >= 1");
    if (k_clusters < 2) throw ConfigError("k_clusters must be >= 2");
    if (predictor_hidden < 0) throw ConfigError("predictor_hidden must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0,1)");
    if (!(bn_eps > 0.0)) throw ConfigError("bn_eps must be > 0");
    if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ConfigError("bn_momentum must lie in [0,1]");
  }
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

namespace detail {

inline Tensor glorot(Index fan_in, Index fan_out, Rng& rng, bool requires_grad) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(fan_in, fan_out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return Tensor(std::move(m), requires_grad);
}

}  // namespace detail

// Learnable tensors of the online (or teacher) encoder f plus batch-norm
// running statistics.
class EncoderParams {
 public:
  EncoderParams() = default;

  static EncoderParams initialize(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    EncoderParams p;
    p.cfg_ = cfg;
    for (Index s = 0; s < cfg.num_stacks; ++s) {
      for (Index t = 0; t < cfg.num_layers; ++t) {
        const Index fan_in = t == 0 ? cfg.in_dim : cfg.hidden_dim;
        p.propagation_.push_back(detail::glorot(fan_in, cfg.hidden_dim, rng, true));
        p.skip_.push_back(detail::glorot(cfg.in_dim, cfg.hidden_dim, rng, true));
      }
    }
    p.bn_gamma_ = Tensor(Matrix::Ones(1, cfg.hidden_dim), true);
    p.bn_beta_ = Tensor(Matrix::Zero(1, cfg.hidden_dim), true);
    p.running_mean_ = Matrix::Zero(1, cfg.hidden_dim);
    p.running_var_ = Matrix::Ones(1, cfg.hidden_dim);
    p.proj_weight_ = detail::glorot(cfg.hidden_dim, cfg.hidden_dim, rng, true);
    p.proj_bias_ = Tensor(Matrix::Zero(1, cfg.hidden_dim), true);
    return p;
  }

  const EncoderConfig& config() const { return cfg_; }

  const Tensor& propagation(Index stack, Index layer) const { return propagation_[slot(stack, layer)]; }
  const Tensor& skip(Index stack, Index layer) const { return skip_[slot(stack, layer)]; }
  const Tensor& bn_gamma() const { return bn_gamma_; }
  const Tensor& bn_beta() const { return bn_beta_; }
  const Tensor& proj_weight() const { return proj_weight_; }
  const Tensor& proj_bias() const { return proj_bias_; }
  const Matrix& running_mean() const { return running_mean_; }
  const Matrix& running_var() const { return running_var_; }
  Matrix& running_mean() { return running_mean_; }
  Matrix& running_var() { return running_var_; }

  // Learnable tensors in a fixed order. Handles share storage with *this.
  std::vector<NamedTensor> named_parameters() const {
    std::vector<NamedTensor> out;
    for (Index s = 0; s < cfg_.num_stacks; ++s) {
      for (Index t = 0; t < cfg_.num_layers; ++t) {
        const std::string base = "arma.s" + std::to_string(s) + ".t" + std::to_string(t);
        out.push_back({base + ".W", propagation_[slot(s, t)]});
        out.push_back({base + ".V", skip_[slot(s, t)]});
      }
    }
    out.push_back({"bn.gamma", bn_gamma_});
    out.push_back({"bn.beta", bn_beta_});
    out.push_back({"proj.W", proj_weight_});
    out.push_back({"proj.b", proj_bias_});
    return out;
  }

  // Deep copy with fresh tensor storage.
  EncoderParams clone(bool requires_grad) const {
    EncoderParams p;
    p.cfg_ = cfg_;
    for (const auto& t : propagation_) p.propagation_.emplace_back(t.value(), requires_grad);
    for (const auto& t : skip_) p.skip_.emplace_back(t.value(), requires_grad);
    p.bn_gamma_ = Tensor(bn_gamma_.value(), requires_grad);
    p.bn_beta_ = Tensor(bn_beta_.value(), requires_grad);
    p.proj_weight_ = Tensor(proj_weight_.value(), requires_grad);
    p.proj_bias_ = Tensor(proj_bias_.value(), requires_grad);
    p.running_mean_ = running_mean_;
    p.running_var_ = running_var_;
    return p;
  }

  void export_to(const std::string& prefix, std::vector<CheckpointTensor>& out) const {
    for (const auto& [name, t] : named_parameters()) {
      out.push_back(CheckpointTensor::from_matrix(prefix + name, t.value()));
    }
    out.push_back(CheckpointTensor::from_matrix(prefix + "bn.running_mean", running_mean_));
    out.push_back(CheckpointTensor::from_matrix(prefix + "bn.running_var", running_var_));
  }

  static EncoderParams import_from(const Checkpoint& ck, const std::string& prefix,
                                   const EncoderConfig& cfg, bool requires_grad) {
    Rng dummy(0);
    EncoderParams p = initialize(cfg, dummy);
    for (auto& [name, t] : p.named_parameters()) {
      Matrix m = ck.find(prefix + name).to_matrix();
      if (m.rows() != t.rows() || m.cols() != t.cols()) {
        throw FormatError("checkpoint tensor " + prefix + name + " has unexpected shape");
      }
      t.mutable_value() = std::move(m);
      t.set_requires_grad(requires_grad);
    }
    p.running_mean_ = ck.find(prefix + "bn.running_mean").to_matrix();
    p.running_var_ = ck.find(prefix + "bn.running_var").to_matrix();
    return p;
  }

 private:
  std::size_t slot(Index s, Index t) const { return static_cast<std::size_t>(s * cfg_.num_layers + t); }

  EncoderConfig cfg_;
  std::vector<Tensor> propagation_;  // [stack * num_layers + layer]
  std::vector<Tensor> skip_;
  Tensor bn_gamma_, bn_beta_;
  Matrix running_mean_, running_var_;
  Tensor proj_weight_, proj_bias_;
};

// Prediction head g: hidden -> K, optionally through one hidden layer.
class PredictorParams {
 public:
  PredictorParams() = default;

  static PredictorParams initialize(const EncoderConfig& cfg, Rng& rng) {
    PredictorParams p;
    p.activation_ = cfg.activation;
    Index in = cfg.hidden_dim;
    if (cfg.predictor_hidden > 0) {
      p.weights_.push_back(detail::glorot(in, cfg.predictor_hidden, rng, true));
      p.biases_.emplace_back(Matrix::Zero(1, cfg.predictor_hidden), true);
      in = cfg.predictor_hidden;
    }
    p.weights_.push_back(detail::glorot(in, cfg.k_clusters, rng, true));
    p.biases_.emplace_back(Matrix::Zero(1, cfg.k_clusters), true);
    return p;
  }

  std::size_t num_layers() const { return weights_.size(); }
  const Tensor& weight(std::size_t l) const { return weights_[l]; }
  const Tensor& bias(std::size_t l) const { return biases_[l]; }

  std::vector<NamedTensor> named_parameters() const {
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.push_back({"pred.l" + std::to_string(l) + ".W", weights_[l]});
      out.push_back({"pred.l" + std::to_string(l) + ".b", biases_[l]});
    }
    return out;
  }

  Tensor logits(const Tensor& h) const {
    Tensor x = h;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      x = matmul(x, weights_[l]) + biases_[l];
      if (l + 1 < weights_.size()) x = activate(x, activation_);
    }
    return x;
  }

  void export_to(std::vector<CheckpointTensor>& out) const {
    for (const auto& [name, t] : named_parameters()) out.push_back(CheckpointTensor::from_matrix(name, t.value()));
  }

  static PredictorParams import_from(const Checkpoint& ck, const EncoderConfig& cfg) {
    Rng dummy(0);
    PredictorParams p = initialize(cfg, dummy);
    for (auto& [name, t] : p.named_parameters()) {
      Matrix m = ck.find(name).to_matrix();
      if (m.rows() != t.rows() || m.cols() != t.cols()) {
        throw FormatError("checkpoint tensor " + name + " has unexpected shape");
      }
      t.mutable_value() = std::move(m);
    }
    return p;
  }

 private:
  Activation activation_ = Activation::elu;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

struct Model {
  EncoderParams encoder;
  PredictorParams predictor;

  static Model initialize(const EncoderConfig& cfg, Rng& rng) {
    Model m;
    m.encoder = EncoderParams::initialize(cfg, rng);
    m.predictor = PredictorParams::initialize(cfg, rng);
    return m;
  }

  std::vector<NamedTensor> named_parameters() const {
    auto out = encoder.named_parameters();
    for (auto& p : predictor.named_parameters()) out.push_back(std::move(p));
    return out;
  }
};

// A node-feature tensor paired with the graph it lives on.
struct GraphView {
  SubjectGraph graph;
  Tensor features;
};

// Per stack s:
//   H1 = act(L X W(s,1) + X V(s,1))
//   Ht = act(L H(t-1) W(s,t) + X V(s,t))
// and the output is the mean of the stacks' last layers.
inline Tensor arma_conv(const NormalizedAdjacency& lhat, const Tensor& x, const EncoderParams& p) {
  const auto& cfg = p.config();
  if (x.rows() != lhat.num_nodes()) {
    throw DimensionError("arma_conv: " + std::to_string(x.rows()) + " feature rows for " +
                         std::to_string(lhat.num_nodes()) + " nodes");
  }
  if (x.cols() != cfg.in_dim) {
    throw DimensionError("arma_conv: feature dimension " + std::to_string(x.cols()) +
                         " != configured " + std::to_string(cfg.in_dim));
  }
  Tensor out;
  for (Index s = 0; s < cfg.num_stacks; ++s) {
    Tensor h = x;
    for (Index t = 0; t < cfg.num_layers; ++t) {
      h = activate(matmul(lhat.apply(h), p.propagation(s, t)) + matmul(x, p.skip(s, t)), cfg.activation);
    }
    out = s == 0 ? h : out + h;
  }
  if (cfg.num_stacks > 1) out = out / static_cast<double>(cfg.num_stacks);
  return out;
}

// Training mode normalizes with batch statistics and folds them into the
// running estimates (unbiased variance, PyTorch-style momentum); evaluation
// mode uses the running estimates and disables dropout.
inline Tensor batch_norm(const Tensor& z, EncoderParams& p, bool training) {
  const auto& cfg = p.config();
  if (training) {
    auto bn = batch_norm_train(z, p.bn_gamma(), p.bn_beta(), cfg.bn_eps);
    const double n = static_cast<double>(z.rows());
    const double correction = n > 1.0 ? n / (n - 1.0) : 1.0;
    const double m = cfg.bn_momentum;
    p.running_mean() = (1.0 - m) * p.running_mean() + m * bn.batch_mean;
    p.running_var() = (1.0 - m) * p.running_var() + (m * correction) * bn.batch_variance;
    return bn.y;
  }
  Tensor mu(p.running_mean());
  Tensor inv_std(Matrix((p.running_var().array() + cfg.bn_eps).rsqrt().matrix()));
  return (z - mu) * inv_std * p.bn_gamma() + p.bn_beta();
}

inline Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  const double scale = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  return x * Tensor(std::move(mask));
}

// h = projection(dropout(batchnorm(arma_conv(view)))).
inline Tensor encoder_forward(const GraphView& view, EncoderParams& p, bool training, Rng* rng = nullptr) {
  NormalizedAdjacency lhat(view.graph, p.config().self_loops);
  Tensor z = arma_conv(lhat, view.features, p);
  z = batch_norm(z, p, training);
  if (training && p.config().dropout > 0.0) {
    if (!rng) throw ContractError("training-mode forward with dropout needs an rng");
    z = dropout(z, p.config().dropout, *rng);
  }
  return matmul(z, p.proj_weight()) + p.proj_bias();
}

// S = softmax(g(h)), n x K and row-stochastic.
inline Tensor assign_clusters(const Tensor& h, const PredictorParams& g) {
  return rowwise_softmax(g.logits(h));
}

// Gradient-free copy of the encoder tracking the online weights by
// exponential moving average.
class EmaTeacher {
 public:
  EmaTeacher() = default;

  EmaTeacher(const EncoderParams& online, double momentum)
      : params_(online.clone(false)), momentum_(momentum) {
    if (!(momentum >= 0.0 && momentum <= 1.0)) throw ConfigError("ema momentum must lie in [0,1]");
  }

  double momentum() const { return momentum_; }
  EncoderParams& params() { return params_; }
  const EncoderParams& params() const { return params_; }

  // tau <- m tau + (1 - m) omega for every learnable tensor; running
  // statistics are copied from the online network.
  void update(const EncoderParams& online) {
    auto mine = params_.named_parameters();
    auto theirs = online.named_parameters();
    if (mine.size() != theirs.size()) throw ContractError("ema_update: parameter lists differ");
    const double m = momentum_;
    for (std::size_t k = 0; k < mine.size(); ++k) {
      Matrix& tau = mine[k].tensor.mutable_value();
      const Matrix& omega = theirs[k].tensor.value();
      if (tau.rows() != omega.rows() || tau.cols() != omega.cols()) {
        throw DimensionError("ema_update: shape mismatch on " + mine[k].name);
      }
      tau = (m * tau.array() + (1.0 - m) * omega.array()).matrix();
    }
    params_.running_mean() = online.running_mean();
    params_.running_var() = online.running_var();
  }

 private:
  EncoderParams params_;
  double momentum_ = 0.99;
};

inline void ema_update(EmaTeacher& teacher, const EncoderParams& online) { teacher.update(online); }

}  // namespace armac3
