#pragma once

// Population graph construction: cosine similarity between subject feature
// vectors, threshold sparsification, and the structural quantities used by
// the clustering losses.

#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "armac3/errors.hpp"
#include "armac3/tensor.hpp"

namespace armac3 {

struct Edge {
  Index i = 0;
  Index j = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Undirected weighted graph without self-loops. Each pair is stored once with
// i < j. total_weight counts both directions: w = sum_ij A_ij.
class SubjectGraph {
 public:
  SubjectGraph() = default;

  SubjectGraph(Index n, std::vector<Edge> edges, double alpha = 0.0)
      : n_(n), edges_(std::move(edges)), alpha_(alpha) {
    for (const Edge& e : edges_) {
      if (e.i < 0 || e.j >= n_ || e.i >= e.j) {
        throw ContractError("edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                            ") must satisfy 0 <= i < j < n");
      }
      if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
        throw ContractError("edge weight must be positive and finite");
      }
    }
    recompute();
  }

  Index num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Eigen::VectorXd& degrees() const { return degrees_; }
  double total_weight() const { return total_weight_; }
  double alpha() const { return alpha_; }

  Index isolated_count() const {
    Index c = 0;
    for (Index i = 0; i < n_; ++i) c += degrees_(i) == 0.0 ? 1 : 0;
    return c;
  }

  // Symmetric sparse adjacency with both directions populated.
  SparseMatrix adjacency() const {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(edges_.size() * 2);
    for (const Edge& e : edges_) {
      t.emplace_back(e.i, e.j, e.weight);
      t.emplace_back(e.j, e.i, e.weight);
    }
    SparseMatrix a(n_, n_);
    a.setFromTriplets(t.begin(), t.end());
    return a;
  }

  Matrix dense_adjacency() const { return Matrix(adjacency()); }

 private:
  void recompute() {
    degrees_ = Eigen::VectorXd::Zero(n_);
    double half = 0.0;
    for (const Edge& e : edges_) {
      degrees_(e.i) += e.weight;
      degrees_(e.j) += e.weight;
      half += e.weight;
    }
    total_weight_ = 2.0 * half;
  }

  Index n_ = 0;
  std::vector<Edge> edges_;
  Eigen::VectorXd degrees_;
  double total_weight_ = 0.0;
  double alpha_ = 0.0;
};

// W_ij = x_i.x_j / (|x_i||x_j|). Rows with zero norm get similarity 0 to
// everything, including themselves, and are counted in diagnostics().
inline Matrix cosine_similarity(const Matrix& x) {
  if (x.rows() < 1 || x.cols() < 1) throw ContractError("cosine_similarity: empty feature matrix");
  if (!x.allFinite()) throw DataError("cosine_similarity: non-finite feature value");
  Matrix u = x;
  for (Index i = 0; i < u.rows(); ++i) {
    const double nrm = u.row(i).norm();
    if (nrm > 0.0) {
      u.row(i) /= nrm;
    } else {
      ++diagnostics().zero_norm_rows;
    }
  }
  Matrix w = u * u.transpose();
  // Enforce exact symmetry and unit diagonal irrespective of rounding.
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = i + 1; j < w.cols(); ++j) w(j, i) = w(i, j);
    if (u.row(i).squaredNorm() > 0.0) w(i, i) = 1.0;
  }
  return w;
}

// Keeps each off-diagonal pair with W_ij >= alpha. The diagonal never becomes
// an edge; encoders add self-connections on their own.
inline SubjectGraph sparsify(const Matrix& w, double alpha) {
  if (w.rows() != w.cols()) throw DimensionError("sparsify: similarity matrix must be square");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  const Index n = w.rows();
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (std::abs(w(i, j) - w(j, i)) > 1e-12) throw ContractError("sparsify: W is not symmetric");
      if (w(i, j) >= alpha && w(i, j) > 0.0) edges.push_back({i, j, w(i, j)});
    }
  }
  if (edges.empty()) {
    std::ostringstream os;
    os << "graph at alpha=" << alpha << " has no edges";
    throw DataError(os.str());
  }
  SubjectGraph g(n, std::move(edges), alpha);
  diagnostics().isolated_nodes += static_cast<std::size_t>(g.isolated_count());
  return g;
}

inline SubjectGraph build_graph(const Matrix& features, double alpha) {
  return sparsify(cosine_similarity(features), alpha);
}

// ---------------------------------------------------------------------------
// Modularity

enum class ModularityConvention {
  newman,         // B = A - d d^T / w,  loss = -Tr(S^T B S) / w
  doubled,  // B = A - d d^T / (2w), loss = -Tr(S^T B S) / (2w)
};

inline double null_model_divisor(ModularityConvention c, double w) {
  return c == ModularityConvention::newman ? w : 2.0 * w;
}

// Tr(S^T B S) = Tr(S^T A S) - |S^T d|^2 / divisor, without forming B.
// Cost O(|E| K + n K).
inline Tensor modularity_quadratic(const SubjectGraph& g, const Tensor& s,
                                   ModularityConvention convention = ModularityConvention::newman) {
  if (s.rows() != g.num_nodes()) {
    throw DimensionError("modularity_quadratic: S has " + std::to_string(s.rows()) +
                         " rows, graph has " + std::to_string(g.num_nodes()) + " nodes");
  }
  if (!(g.total_weight() > 0.0)) throw NumericError("modularity undefined on a graph with w = 0");
  auto a = std::make_shared<const SparseMatrix>(g.adjacency());
  Tensor within = sum(mul(s, spmm(a, s)));
  Tensor d(Matrix(g.degrees().transpose()));
  Tensor sd = matmul(d, s);
  Tensor expected = sum(square(sd)) / null_model_divisor(convention, g.total_weight());
  return within - expected;
}

// ---------------------------------------------------------------------------
// Normalized adjacency D^-1/2 (A [+ I]) D^-1/2 as a constant operator.

class NormalizedAdjacency {
 public:
  NormalizedAdjacency(const SubjectGraph& g, bool self_loops) : n_(g.num_nodes()) {
    Eigen::VectorXd deg = g.degrees();
    if (self_loops) deg.array() += 1.0;
    Eigen::VectorXd inv_sqrt(n_);
    for (Index i = 0; i < n_; ++i) {
      if (deg(i) > 0.0) {
        inv_sqrt(i) = 1.0 / std::sqrt(deg(i));
      } else {
        inv_sqrt(i) = 0.0;
        ++isolated_;
      }
    }
    diagnostics().isolated_nodes += static_cast<std::size_t>(isolated_);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(g.num_edges() * 2 + (self_loops ? static_cast<std::size_t>(n_) : 0));
    for (const Edge& e : g.edges()) {
      const double v = e.weight * inv_sqrt(e.i) * inv_sqrt(e.j);
      t.emplace_back(e.i, e.j, v);
      t.emplace_back(e.j, e.i, v);
    }
    if (self_loops) {
      for (Index i = 0; i < n_; ++i) t.emplace_back(i, i, inv_sqrt(i) * inv_sqrt(i));
    }
    auto op = std::make_shared<SparseMatrix>(n_, n_);
    op->setFromTriplets(t.begin(), t.end());
    op_ = std::move(op);
  }

  Index num_nodes() const { return n_; }
  Index isolated_count() const { return isolated_; }
  const SparseMatrix& matrix() const { return *op_; }
  Matrix dense() const { return Matrix(*op_); }

  Tensor apply(const Tensor& h) const { return spmm(op_, h); }

 private:
  Index n_ = 0;
  Index isolated_ = 0;
  std::shared_ptr<const SparseMatrix> op_;
};

// ---------------------------------------------------------------------------
// Edge-list text format:
//   # n=<n> alpha=<alpha>
//   i<TAB>j<TAB>weight

inline void write_edge_list(std::ostream& os, const SubjectGraph& g) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", g.alpha());
  os << "# n=" << g.num_nodes() << " alpha=" << buf << "\n";
  for (const Edge& e : g.edges()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.weight);
    os << e.i << '\t' << e.j << '\t' << buf << '\n';
  }
}

inline SubjectGraph read_edge_list(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("edge list: missing header");
  long long n = -1;
  double alpha = 0.0;
  if (std::sscanf(line.c_str(), "# n=%lld alpha=%lf", &n, &alpha) != 2 || n < 0) {
    throw FormatError("edge list: malformed header '" + line + "'");
  }
  std::vector<Edge> edges;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Edge e;
    if (!(ls >> e.i >> e.j >> e.weight)) {
      throw FormatError("edge list: malformed line " + std::to_string(lineno));
    }
    edges.push_back(e);
  }
  return SubjectGraph(static_cast<Index>(n), std::move(edges), alpha);
}

}  // namespace armac3
