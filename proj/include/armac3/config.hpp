#pragma once

// Run configuration and the flat `key = value` config file format.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "armac3/augment.hpp"
#include "armac3/encoder.hpp"
#include "armac3/errors.hpp"
#include "armac3/graph.hpp"
#include "armac3/metrics.hpp"
#include "armac3/objectives.hpp"

namespace armac3 {

struct RunConfig {
  // graph
  double alpha = 0.5;
  // objective
  double lambda_con = 0.3;
  double lambda_struct = 1.0;
  double beta = 0.5;
  double contrastive_temperature = 1.0;
  StructMode struct_mode = StructMode::modularity;
  ModularityConvention modularity_convention = ModularityConvention::newman;
  // encoder
  Index hidden_dim = 256;
  Index num_stacks = 1;
  Index num_layers = 1;
  Activation activation = Activation::elu;
  double dropout = 0.2;
  Index k_clusters = 2;
  Index predictor_hidden = 0;
  bool self_loops = false;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  // optimization
  double lr = 1e-4;
  double weight_decay = 1e-4;
  Index step_size = 200;
  double lr_gamma = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_momentum = 0.99;
  Index epochs = 2000;
  // augmentation
  double p_edge_drop = 0.2;
  double p_feat_mask = 0.2;
  // protocol
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::unsup;
  double labeled_fraction = 0.10;
  Index checkpoint_every = 0;

  void validate() const {
    auto prob = [](double p, const char* name, bool allow_one) {
      if (!(p >= 0.0 && (allow_one ? p <= 1.0 : p < 1.0))) {
        throw ConfigError(std::string(name) + (allow_one ? " must lie in [0,1]" : " must lie in [0,1)"));
      }
    };
    prob(alpha, "alpha", true);
    prob(beta, "beta", true);
    prob(dropout, "dropout", false);
    prob(p_edge_drop, "p_edge_drop", false);
    prob(p_feat_mask, "p_feat_mask", false);
    prob(ema_momentum, "ema_momentum", true);
    prob(bn_momentum, "bn_momentum", true);
    prob(adam_beta1, "adam_beta1", false);
    prob(adam_beta2, "adam_beta2", false);
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) throw ConfigError("labeled_fraction must lie in (0,1]");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (k_clusters < 2) throw ConfigError("k_clusters must be >= 2");
    if (hidden_dim < 1 || num_stacks < 1 || num_layers < 1) throw ConfigError("encoder sizes must be >= 1");
    if (predictor_hidden < 0) throw ConfigError("predictor_hidden must be >= 0");
    if (step_size < 1) throw ConfigError("step_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(lr_gamma > 0.0)) throw ConfigError("lr_gamma must be > 0");
    if (!(adam_eps > 0.0) || !(bn_eps > 0.0)) throw ConfigError("epsilons must be > 0");
    if (!(contrastive_temperature > 0.0)) throw ConfigError("contrastive_temperature must be > 0");
    if (!(lambda_con >= 0.0) || !(lambda_struct >= 0.0)) throw ConfigError("loss weights must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  }

  EncoderConfig encoder_config(Index in_dim, Index k) const {
    EncoderConfig e;
    e.in_dim = in_dim;
    e.hidden_dim = hidden_dim;
    e.num_stacks = num_stacks;
    e.num_layers = num_layers;
    e.k_clusters = k;
    e.predictor_hidden = predictor_hidden;
    e.activation = activation;
    e.dropout = dropout;
    e.self_loops = self_loops;
    e.bn_eps = bn_eps;
    e.bn_momentum = bn_momentum;
    return e;
  }

  AugmentConfig augment_config() const { return {p_edge_drop, p_feat_mask}; }
};

// Everything a config file can set: the run configuration plus I/O paths and
// evaluation options.
struct Settings {
  RunConfig run;
  std::string features;
  std::string labels;
  std::string roi_dump;
  std::string graph_out;
  std::string checkpoint;
  std::string report_out;
  std::string log_out;
  int positive_class = 1;
  Index n_runs = 10;
  Index n_folds = 20;
  Index bins = 20;
  StdConvention std_convention = StdConvention::sample;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(const std::string& v) { return v; }
inline std::string fmt(Activation v) { return std::string(to_string(v)); }
inline std::string fmt(TrainMode v) { return std::string(to_string(v)); }
inline std::string fmt(StructMode v) { return std::string(to_string(v)); }
inline std::string fmt(ModularityConvention v) { return std::string(to_string(v)); }
inline std::string fmt(StdConvention v) { return std::string(to_string(v)); }

inline void parse_into(const std::string& key, const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError(key + ": expected a number, got '" + s + "'");
}
inline void parse_into(const std::string& key, const std::string& s, long& out) {
  char* end = nullptr;
  out = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError(key + ": expected an integer, got '" + s + "'");
}
inline void parse_into(const std::string& key, const std::string& s, int& out) {
  long v = 0;
  parse_into(key, s, v);
  out = static_cast<int>(v);
}
inline void parse_into(const std::string& key, const std::string& s, std::uint64_t& out) {
  char* end = nullptr;
  out = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || end != s.c_str() + s.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
}
inline void parse_into(const std::string& key, const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") out = true;
  else if (s == "false" || s == "0" || s == "no") out = false;
  else throw ConfigError(key + ": expected true|false, got '" + s + "'");
}
inline void parse_into(const std::string&, const std::string& s, std::string& out) { out = s; }
inline void parse_into(const std::string&, const std::string& s, Activation& out) { out = parse_activation(s); }
inline void parse_into(const std::string&, const std::string& s, TrainMode& out) { out = parse_train_mode(s); }
inline void parse_into(const std::string&, const std::string& s, StructMode& out) { out = parse_struct_mode(s); }
inline void parse_into(const std::string&, const std::string& s, ModularityConvention& out) {
  out = parse_modularity_convention(s);
}
inline void parse_into(const std::string&, const std::string& s, StdConvention& out) { out = parse_std_convention(s); }

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  bool output_path = false;  // excluded from the config echo
  std::function<void(Settings&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;
};

namespace detail {

template <class T>
ConfigKey run_key(std::string name, T RunConfig::*member, std::string help) {
  return {name, std::move(help), false,
          [name, member](Settings& s, const std::string& v) { parse_into(name, v, s.run.*member); },
          [member](const Settings& s) { return fmt(s.run.*member); }};
}

template <class T>
ConfigKey settings_key(std::string name, T Settings::*member, std::string help, bool output_path = false) {
  return {name, std::move(help), output_path,
          [name, member](Settings& s, const std::string& v) { parse_into(name, v, s.*member); },
          [member](const Settings& s) { return fmt(s.*member); }};
}

}  // namespace detail

// Every recognized key, in echo order.
inline const std::vector<ConfigKey>& config_keys() {
  using detail::run_key;
  using detail::settings_key;
  static const std::vector<ConfigKey> keys = {
      run_key("mode", &RunConfig::mode, "unsup | semi"),
      run_key("seed", &RunConfig::seed, "base seed; run/fold r uses seed + r"),
      run_key("alpha", &RunConfig::alpha, "cosine-similarity threshold for edges"),
      run_key("lambda_con", &RunConfig::lambda_con, "weight of the contrastive loss"),
      run_key("lambda_struct", &RunConfig::lambda_struct, "weight of the structural loss (semi mode)"),
      run_key("beta", &RunConfig::beta, "cross-view vs cross-network balance"),
      run_key("contrastive_temperature", &RunConfig::contrastive_temperature, "similarity temperature"),
      run_key("struct_mode", &RunConfig::struct_mode, "modularity | mincut"),
      run_key("modularity_convention", &RunConfig::modularity_convention, "newman | doubled"),
      run_key("hidden_dim", &RunConfig::hidden_dim, "encoder width"),
      run_key("num_stacks", &RunConfig::num_stacks, "parallel ARMA stacks"),
      run_key("num_layers", &RunConfig::num_layers, "ARMA recursion depth"),
      run_key("activation", &RunConfig::activation, "relu | elu | selu | silu"),
      run_key("dropout", &RunConfig::dropout, "dropout rate after batch norm"),
      run_key("k_clusters", &RunConfig::k_clusters, "clusters (unsup mode)"),
      run_key("predictor_hidden", &RunConfig::predictor_hidden, "hidden width of g, 0 for one affine layer"),
      run_key("self_loops", &RunConfig::self_loops, "add self-loops inside the propagation operator"),
      run_key("bn_eps", &RunConfig::bn_eps, "batch-norm epsilon"),
      run_key("bn_momentum", &RunConfig::bn_momentum, "batch-norm running-stat momentum"),
      run_key("lr", &RunConfig::lr, "initial learning rate"),
      run_key("weight_decay", &RunConfig::weight_decay, "decoupled weight decay"),
      run_key("step_size", &RunConfig::step_size, "iterations between lr decays"),
      run_key("lr_gamma", &RunConfig::lr_gamma, "lr decay factor"),
      run_key("adam_beta1", &RunConfig::adam_beta1, "first-moment decay"),
      run_key("adam_beta2", &RunConfig::adam_beta2, "second-moment decay"),
      run_key("adam_eps", &RunConfig::adam_eps, "optimizer epsilon"),
      run_key("ema_momentum", &RunConfig::ema_momentum, "teacher EMA momentum"),
      run_key("epochs", &RunConfig::epochs, "training iterations (full graph each)"),
      run_key("p_edge_drop", &RunConfig::p_edge_drop, "edge drop probability per view"),
      run_key("p_feat_mask", &RunConfig::p_feat_mask, "feature mask probability per entry"),
      run_key("labeled_fraction", &RunConfig::labeled_fraction, "labeled share per class (semi mode)"),
      run_key("checkpoint_every", &RunConfig::checkpoint_every, "intermediate checkpoint interval, 0 = off"),
      settings_key("features", &Settings::features, "feature CSV path"),
      settings_key("labels", &Settings::labels, "labels file path"),
      settings_key("roi_dump", &Settings::roi_dump, "directory of per-subject ROI dumps"),
      settings_key("bins", &Settings::bins, "histogram bins per ROI"),
      settings_key("positive_class", &Settings::positive_class, "class id treated as positive"),
      settings_key("n_runs", &Settings::n_runs, "repeated runs (unsup mode)"),
      settings_key("n_folds", &Settings::n_folds, "stratified folds (semi mode)"),
      settings_key("std_convention", &Settings::std_convention, "sample | population"),
      settings_key("graph_out", &Settings::graph_out, "edge-list output path", true),
      settings_key("checkpoint", &Settings::checkpoint, "checkpoint path", true),
      settings_key("report_out", &Settings::report_out, "report CSV path", true),
      settings_key("log_out", &Settings::log_out, "training log CSV path", true),
  };
  return keys;
}

inline const ConfigKey& find_config_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return k;
  }
  throw ConfigError("unknown config key '" + name + "'");
}

inline void set_config_value(Settings& s, const std::string& key, const std::string& value) {
  find_config_key(key).set(s, value);
}

// Applies `key = value` lines on top of `s`. '#' starts a comment.
inline void apply_config_text(Settings& s, std::istream& in, const std::string& source = "config") {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_config_value(s, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_text(Settings& s, const std::string& text, const std::string& source = "config") {
  std::istringstream in(text);
  apply_config_text(s, in, source);
}

inline Settings load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Settings s;
  apply_config_text(s, in, path.string());
  return s;
}

// Effective configuration as `key = value` lines. Output paths are left out
// so that identical runs writing to different places produce identical
// artifacts.
inline std::string config_echo(const Settings& s) {
  std::string out;
  for (const auto& k : config_keys()) {
    if (k.output_path) continue;
    out += k.name + " = " + k.get(s) + "\n";
  }
  return out;
}

}  // namespace armac3
