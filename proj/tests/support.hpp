#pragma once

#include <functional>
#include <random>
#include <vector>

#include "armac3/armac3.hpp"

namespace armac3::testing {

inline Matrix random_matrix(Index r, Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

inline Matrix random_stochastic(Index n, Index k, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix s(n, k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) s(i, j) = u(rng);
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

// Erdos-Renyi graph with uniform weights in (0.1, 1]; at least one edge.
inline SubjectGraph random_graph(Index n, double p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (u(rng) < p) edges.push_back({i, j, 0.1 + 0.9 * u(rng)});
    }
  }
  if (edges.empty()) edges.push_back({0, n - 1, 1.0});
  return SubjectGraph(n, std::move(edges));
}

// Largest norm-wise relative error between the analytic gradient of f with
// respect to each leaf and a central finite difference.
inline double max_gradient_error(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                                 double h = 1e-6) {
  for (auto& t : leaves) t.zero_grad();
  backward(f());
  double worst = 0.0;
  for (auto& t : leaves) {
    const Matrix analytic = t.grad();
    Matrix numeric(t.rows(), t.cols());
    for (Index i = 0; i < t.value().size(); ++i) {
      double& x = t.mutable_value().data()[i];
      const double x0 = x;
      x = x0 + h;
      const double fp = f().item();
      x = x0 - h;
      const double fm = f().item();
      x = x0;
      numeric.data()[i] = (fp - fm) / (2.0 * h);
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
    worst = std::max(worst, (analytic - numeric).norm() / scale);
  }
  return worst;
}

}  // namespace armac3::testing
