#pragma once

#include <random>

#include "armac3/encoder.hpp"
#include "armac3/errors.hpp"
#include "armac3/graph.hpp"

namespace armac3 {

struct AugmentConfig {
  double p_edge_drop = 0.2;
  double p_feat_mask = 0.2;

  void validate() const {
    if (!(p_edge_drop >= 0.0 && p_edge_drop < 1.0)) throw ConfigError("p_edge_drop must lie in [0,1)");
    if (!(p_feat_mask >= 0.0 && p_feat_mask < 1.0)) throw ConfigError("p_feat_mask must lie in [0,1)");
  }
};

// One stochastic view: each undirected edge survives with probability
// 1 - p_edge_drop (a single coin per pair), and each (node, feature) entry is
// zeroed with probability p_feat_mask. A view that loses every edge is redrawn
// once before giving up.
inline GraphView sample_view(const SubjectGraph& g, const Matrix& x, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (x.rows() != g.num_nodes()) throw DimensionError("sample_view: feature rows do not match graph");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<Edge> kept;
    kept.reserve(g.num_edges());
    for (const Edge& e : g.edges()) {
      if (cfg.p_edge_drop == 0.0 || coin(rng) >= cfg.p_edge_drop) kept.push_back(e);
    }
    Matrix xv = x;
    if (cfg.p_feat_mask > 0.0) {
      for (Index i = 0; i < xv.size(); ++i) {
        if (coin(rng) < cfg.p_feat_mask) xv.data()[i] = 0.0;
      }
    }
    if (!kept.empty() || g.num_edges() == 0) {
      return {SubjectGraph(g.num_nodes(), std::move(kept), g.alpha()), Tensor(std::move(xv))};
    }
  }
  throw NumericError("augmented view has no edges after resampling; lower p_edge_drop");
}

}  // namespace armac3
