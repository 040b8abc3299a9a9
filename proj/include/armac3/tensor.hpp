#pragma once

// Dense 64-bit tensors with tape-based reverse-mode differentiation.
//
// Every tensor is two-dimensional (rows x cols); scalars are 1x1 and vectors
// are 1xN or Nx1. A result node keeps references to its inputs and a closure
// that pushes its gradient back into them. Each node is stamped with a
// monotonically increasing sequence number at creation, so a Tape built from
// a loss replays operations in exact reverse execution order.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "armac3/errors.hpp"

namespace armac3 {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Index = Eigen::Index;

// Soft warnings raised by numerics that chose a defined fallback instead of
// failing (zero-norm rows, isolated nodes). Per-thread, reset by the caller.
struct Diagnostics {
  std::size_t zero_norm_rows = 0;
  std::size_t isolated_nodes = 0;

  void reset() { *this = Diagnostics{}; }
};

inline Diagnostics& diagnostics() {
  thread_local Diagnostics d;
  return d;
}

namespace detail {

inline std::uint64_t next_sequence() {
  thread_local std::uint64_t counter = 0;
  return ++counter;
}

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Node&)> backward;

  template <class Expr>
  void accumulate(const Eigen::MatrixBase<Expr>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

inline std::string shape_str(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

}  // namespace detail

class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::Node>()) {}

  explicit Tensor(Matrix value, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (!value.allFinite()) throw NumericError("tensor constructed from non-finite values");
    node_->value = std::move(value);
    node_->seq = detail::next_sequence();
    set_requires_grad(requires_grad);
  }

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Matrix::Zero(rows, cols), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor(Matrix::Constant(1, 1, v), requires_grad);
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r == 0 ? 0 : static_cast<Index>(rows.begin()->size());
    Matrix m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c) throw DimensionError("ragged initializer");
      Index j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return Tensor(std::move(m), requires_grad);
  }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }

  const Matrix& value() const { return node_->value; }
  double operator()(Index r, Index c) const { return node_->value(r, c); }

  // In-place access for parameters. Only leaves may be mutated; results of
  // operations are immutable once recorded.
  Matrix& mutable_value() {
    if (!is_leaf()) throw ContractError("mutable_value() on a non-leaf tensor");
    return node_->value;
  }

  double item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + detail::shape_str(value()));
    return node_->value(0, 0);
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return !node_->backward; }
  bool has_grad() const { return node_->grad.size() != 0; }
  std::string_view op_name() const { return node_->op; }
  std::uint64_t sequence() const { return node_->seq; }

  const Matrix& grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient accumulator");
    return node_->grad;
  }

  void set_requires_grad(bool on) {
    if (!is_leaf()) throw ContractError("requires_grad can only be toggled on leaves");
    node_->requires_grad = on;
    if (on) {
      node_->grad = Matrix::Zero(rows(), cols());
    } else {
      node_->grad.resize(0, 0);
    }
  }

  void zero_grad() {
    if (node_->requires_grad) node_->grad.setZero(rows(), cols());
  }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Constant copy of a tensor's value that stops gradient flow.
inline Tensor detach(const Tensor& t) { return Tensor(t.value()); }

namespace detail {

template <class Backward>
Tensor record(Matrix value, std::string_view op, std::initializer_list<const Tensor*> inputs,
              Backward&& backward) {
  if (!value.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + std::string(op));
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->seq = next_sequence();
  node->op = op;
  bool any = false;
  for (const Tensor* t : inputs) any = any || t->requires_grad();
  if (any) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->node());
    node->backward = std::forward<Backward>(backward);
  }
  return Tensor(std::move(node));
}

// Two-dimensional broadcasting: each operand's extent along an axis must equal
// the result's or be 1.
inline std::array<Index, 2> broadcast_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  auto axis = [&](Index x, Index y) -> Index {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a.value()) +
                         " with " + shape_str(b.value()));
  };
  return {axis(a.rows(), b.rows()), axis(a.cols(), b.cols())};
}

inline Matrix expand(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

inline Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
  Matrix out = g;
  if (rows == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

template <class F, class DF>
Tensor unary(const Tensor& a, std::string_view op, F f, DF df) {
  Matrix y = a.value().unaryExpr(f);
  auto an = a.node();
  return record(std::move(y), op, {&a}, [an, df](const Node& self) {
    Matrix d = an->value.binaryExpr(self.value, df);
    an->accumulate(self.grad.cwiseProduct(d));
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops (2-D broadcasting)

inline Tensor add(const Tensor& a, const Tensor& b) {
  auto [r, c] = detail::broadcast_shape(a, b, "add");
  Matrix y = detail::expand(a.value(), r, c) + detail::expand(b.value(), r, c);
  auto an = a.node(), bn = b.node();
  return detail::record(std::move(y), "add", {&a, &b}, [an, bn](const detail::Node& self) {
    an->accumulate(detail::reduce_to(self.grad, an->value.rows(), an->value.cols()));
    bn->accumulate(detail::reduce_to(self.grad, bn->value.rows(), bn->value.cols()));
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  auto [r, c] = detail::broadcast_shape(a, b, "sub");
  Matrix y = detail::expand(a.value(), r, c) - detail::expand(b.value(), r, c);
  auto an = a.node(), bn = b.node();
  return detail::record(std::move(y), "sub", {&a, &b}, [an, bn](const detail::Node& self) {
    an->accumulate(detail::reduce_to(self.grad, an->value.rows(), an->value.cols()));
    bn->accumulate(-detail::reduce_to(self.grad, bn->value.rows(), bn->value.cols()));
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  auto [r, c] = detail::broadcast_shape(a, b, "mul");
  Matrix ea = detail::expand(a.value(), r, c);
  Matrix eb = detail::expand(b.value(), r, c);
  Matrix y = ea.cwiseProduct(eb);
  auto an = a.node(), bn = b.node();
  return detail::record(std::move(y), "mul", {&a, &b},
                        [an, bn, ea = std::move(ea), eb = std::move(eb)](const detail::Node& self) {
                          if (an->requires_grad) {
                            an->accumulate(detail::reduce_to(self.grad.cwiseProduct(eb),
                                                             an->value.rows(), an->value.cols()));
                          }
                          if (bn->requires_grad) {
                            bn->accumulate(detail::reduce_to(self.grad.cwiseProduct(ea),
                                                             bn->value.rows(), bn->value.cols()));
                          }
                        });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  auto [r, c] = detail::broadcast_shape(a, b, "div");
  Matrix ea = detail::expand(a.value(), r, c);
  Matrix eb = detail::expand(b.value(), r, c);
  Matrix y = ea.cwiseQuotient(eb);
  auto an = a.node(), bn = b.node();
  return detail::record(
      std::move(y), "div", {&a, &b}, [an, bn, eb = std::move(eb)](const detail::Node& self) {
        if (an->requires_grad) {
          an->accumulate(detail::reduce_to(self.grad.cwiseQuotient(eb), an->value.rows(),
                                           an->value.cols()));
        }
        if (bn->requires_grad) {
          // d(a/b)/db = -y/b
          Matrix gb = -self.grad.cwiseProduct(self.value).cwiseQuotient(eb);
          bn->accumulate(detail::reduce_to(gb, bn->value.rows(), bn->value.cols()));
        }
      });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  Matrix y = a.value().array() + s;
  auto an = a.node();
  return detail::record(std::move(y), "add_scalar", {&a},
                        [an](const detail::Node& self) { an->accumulate(self.grad); });
}

inline Tensor mul_scalar(const Tensor& a, double s) {
  Matrix y = a.value() * s;
  auto an = a.node();
  return detail::record(std::move(y), "mul_scalar", {&a},
                        [an, s](const detail::Node& self) { an->accumulate(self.grad * s); });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(mul_scalar(a, -1.0), s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return mul_scalar(a, 1.0 / s); }
inline Tensor operator-(const Tensor& a) { return mul_scalar(a, -1.0); }

// ---------------------------------------------------------------------------
// Elementwise unary ops

inline Tensor exp(const Tensor& a) {
  return detail::unary(a, "exp", [](double x) { return std::exp(x); },
                       [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
  if ((a.value().array() <= 0.0).any()) throw DomainError("log of non-positive value");
  return detail::unary(a, "log", [](double x) { return std::log(x); },
                       [](double x, double) { return 1.0 / x; });
}

inline Tensor square(const Tensor& a) {
  return detail::unary(a, "square", [](double x) { return x * x; },
                       [](double x, double) { return 2.0 * x; });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                       [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor elu(const Tensor& a, double alpha = 1.0) {
  return detail::unary(
      a, "elu", [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double) { return x > 0.0 ? 1.0 : alpha * std::exp(x); });
}

inline constexpr double kSeluScale = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

inline Tensor selu(const Tensor& a) {
  return detail::unary(
      a, "selu",
      [](double x) { return kSeluScale * (x > 0.0 ? x : kSeluAlpha * std::expm1(x)); },
      [](double x, double) { return kSeluScale * (x > 0.0 ? 1.0 : kSeluAlpha * std::exp(x)); });
}

inline Tensor silu(const Tensor& a) {
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return detail::unary(a, "silu", [sigmoid](double x) { return x * sigmoid(x); },
                       [sigmoid](double x, double) {
                         const double s = sigmoid(x);
                         return s + x * s * (1.0 - s);
                       });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& a) {
  Matrix y = Matrix::Constant(1, 1, a.value().sum());
  auto an = a.node();
  return detail::record(std::move(y), "sum", {&a}, [an](const detail::Node& self) {
    an->accumulate(Matrix::Constant(an->value.rows(), an->value.cols(), self.grad(0, 0)));
  });
}

inline Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean of empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size()));
}

// 1 x cols vector of column sums.
inline Tensor column_sum(const Tensor& a) {
  Matrix y = a.value().colwise().sum();
  auto an = a.node();
  return detail::record(std::move(y), "column_sum", {&a}, [an](const detail::Node& self) {
    an->accumulate(self.grad.replicate(an->value.rows(), 1));
  });
}

// rows x 1 vector of row sums.
inline Tensor row_sum(const Tensor& a) {
  Matrix y = a.value().rowwise().sum();
  auto an = a.node();
  return detail::record(std::move(y), "row_sum", {&a}, [an](const detail::Node& self) {
    an->accumulate(self.grad.replicate(1, an->value.cols()));
  });
}

inline Tensor frobenius_norm(const Tensor& a) {
  const double n = a.value().norm();
  Matrix y = Matrix::Constant(1, 1, n);
  auto an = a.node();
  return detail::record(std::move(y), "frobenius_norm", {&a}, [an, n](const detail::Node& self) {
    if (n == 0.0) return;
    an->accumulate(an->value * (self.grad(0, 0) / n));
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + detail::shape_str(a.value()) + " x " +
                         detail::shape_str(b.value()));
  }
  Matrix y = a.value() * b.value();
  auto an = a.node(), bn = b.node();
  return detail::record(std::move(y), "matmul", {&a, &b}, [an, bn](const detail::Node& self) {
    if (an->requires_grad) an->accumulate(self.grad * bn->value.transpose());
    if (bn->requires_grad) bn->accumulate(an->value.transpose() * self.grad);
  });
}

inline Tensor transpose(const Tensor& a) {
  Matrix y = a.value().transpose();
  auto an = a.node();
  return detail::record(std::move(y), "transpose", {&a}, [an](const detail::Node& self) {
    an->accumulate(self.grad.transpose());
  });
}

// Product of a constant sparse operator with a tensor.
inline Tensor spmm(std::shared_ptr<const SparseMatrix> op, const Tensor& h) {
  if (op->cols() != h.rows()) {
    throw DimensionError("spmm: operator has " + std::to_string(op->cols()) +
                         " columns, operand " + detail::shape_str(h.value()));
  }
  Matrix y = (*op) * h.value();
  auto hn = h.node();
  return detail::record(std::move(y), "spmm", {&h}, [hn, op](const detail::Node& self) {
    hn->accumulate(op->transpose() * self.grad);
  });
}

// Tr(S^T M S) for dense M.
inline Tensor trace_quadratic(const Tensor& s, const Tensor& m) {
  if (m.rows() != m.cols() || m.cols() != s.rows()) {
    throw DimensionError("trace_quadratic: S " + detail::shape_str(s.value()) + ", M " +
                         detail::shape_str(m.value()));
  }
  return sum(mul(s, matmul(m, s)));
}

// n x 1 column of the diagonal of a square tensor.
inline Tensor diagonal(const Tensor& a) {
  if (a.rows() != a.cols()) throw DimensionError("diagonal of non-square tensor");
  Matrix y = a.value().diagonal();
  auto an = a.node();
  return detail::record(std::move(y), "diagonal", {&a}, [an](const detail::Node& self) {
    Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
    g.diagonal() = self.grad.col(0);
    an->accumulate(g);
  });
}

// Copy of square `a` whose diagonal is replaced by the n x 1 column `v`.
inline Tensor set_diagonal(const Tensor& a, const Tensor& v) {
  if (a.rows() != a.cols() || v.rows() != a.rows() || v.cols() != 1) {
    throw DimensionError("set_diagonal: " + detail::shape_str(a.value()) + " with " +
                         detail::shape_str(v.value()));
  }
  Matrix y = a.value();
  y.diagonal() = v.value().col(0);
  auto an = a.node(), vn = v.node();
  return detail::record(std::move(y), "set_diagonal", {&a, &v}, [an, vn](const detail::Node& self) {
    if (an->requires_grad) {
      Matrix g = self.grad;
      g.diagonal().setZero();
      an->accumulate(g);
    }
    if (vn->requires_grad) vn->accumulate(Matrix(self.grad.diagonal()));
  });
}

// m x 1 column holding a(r_k, c_k) for each requested entry.
inline Tensor pick(const Tensor& a, std::vector<std::pair<Index, Index>> entries) {
  Matrix y(static_cast<Index>(entries.size()), 1);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto [r, c] = entries[k];
    if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw DimensionError("pick: index out of range");
    y(static_cast<Index>(k), 0) = a.value()(r, c);
  }
  auto an = a.node();
  return detail::record(std::move(y), "pick", {&a},
                        [an, entries = std::move(entries)](const detail::Node& self) {
                          Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
                          for (std::size_t k = 0; k < entries.size(); ++k) {
                            g(entries[k].first, entries[k].second) += self.grad(static_cast<Index>(k), 0);
                          }
                          an->accumulate(g);
                        });
}

// ---------------------------------------------------------------------------
// Row-wise normalizations

inline Tensor rowwise_softmax(const Tensor& a) {
  if (a.rows() < 1 || a.cols() < 1) throw DimensionError("rowwise_softmax of empty tensor");
  Matrix y(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.value().row(i).maxCoeff();
    y.row(i) = (a.value().row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  auto an = a.node();
  return detail::record(std::move(y), "rowwise_softmax", {&a}, [an](const detail::Node& self) {
    const Matrix& s = self.value;
    Matrix dot = self.grad.cwiseProduct(s).rowwise().sum();
    Matrix g = s.cwiseProduct(self.grad - dot.replicate(1, s.cols()));
    an->accumulate(g);
  });
}

// rows x 1 column of log(sum_j exp(a_ij)), stabilized by the row maximum.
inline Tensor row_logsumexp(const Tensor& a) {
  if (a.cols() < 1) throw DimensionError("row_logsumexp of empty rows");
  Matrix y(a.rows(), 1);
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.value().row(i).maxCoeff();
    y(i, 0) = m + std::log((a.value().row(i).array() - m).exp().sum());
  }
  auto an = a.node();
  return detail::record(std::move(y), "row_logsumexp", {&a}, [an](const detail::Node& self) {
    Matrix p = (an->value - self.value.replicate(1, an->value.cols())).array().exp().matrix();
    an->accumulate(p.cwiseProduct(self.grad.replicate(1, an->value.cols())));
  });
}

// Scales each row to unit Euclidean norm. All-zero rows stay zero and are
// counted in diagnostics().zero_norm_rows.
inline Tensor l2_normalize_rows(const Tensor& a) {
  Matrix y = a.value();
  Eigen::VectorXd norms(a.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    norms(i) = a.value().row(i).norm();
    if (norms(i) > 0.0) {
      y.row(i) /= norms(i);
    } else {
      ++diagnostics().zero_norm_rows;
    }
  }
  auto an = a.node();
  return detail::record(std::move(y), "l2_normalize_rows", {&a},
                        [an, norms = std::move(norms)](const detail::Node& self) {
                          Matrix g = Matrix::Zero(self.value.rows(), self.value.cols());
                          for (Index i = 0; i < g.rows(); ++i) {
                            if (norms(i) == 0.0) continue;
                            const double proj = self.value.row(i).dot(self.grad.row(i));
                            g.row(i) = (self.grad.row(i) - proj * self.value.row(i)) / norms(i);
                          }
                          an->accumulate(g);
                        });
}

// ---------------------------------------------------------------------------
// Batch normalization over rows (training statistics), fused for precision.

struct BatchNormOutput {
  Tensor y;
  Matrix batch_mean;      // 1 x c
  Matrix batch_variance;  // 1 x c, biased (divides by n)
};

inline BatchNormOutput batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                        double eps) {
  const Index n = x.rows(), c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw DimensionError("batch_norm: affine parameters must be 1x" + std::to_string(c));
  }
  if (n < 1) throw DimensionError("batch_norm on empty batch");
  Matrix mu = x.value().colwise().mean();
  Matrix centered = x.value() - mu.replicate(n, 1);
  Matrix var = centered.array().square().colwise().sum().matrix() / static_cast<double>(n);
  Matrix inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix xhat = centered.cwiseProduct(inv_std.replicate(n, 1));
  Matrix y = xhat.cwiseProduct(gamma.value().replicate(n, 1)) + beta.value().replicate(n, 1);
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  Tensor out = detail::record(
      std::move(y), "batch_norm", {&x, &gamma, &beta},
      [xn, gn, bn, xhat, inv_std](const detail::Node& self) {
        const Index rows = xhat.rows();
        const Matrix& g = self.grad;
        if (bn->requires_grad) bn->accumulate(g.colwise().sum());
        if (gn->requires_grad) gn->accumulate(g.cwiseProduct(xhat).colwise().sum());
        if (xn->requires_grad) {
          Matrix dxhat = g.cwiseProduct(gn->value.replicate(rows, 1));
          Matrix s1 = dxhat.colwise().sum();
          Matrix s2 = dxhat.cwiseProduct(xhat).colwise().sum();
          const double nn = static_cast<double>(rows);
          Matrix dx = (dxhat * nn - s1.replicate(rows, 1) - xhat.cwiseProduct(s2.replicate(rows, 1)))
                          .cwiseProduct(inv_std.replicate(rows, 1)) /
                      nn;
          xn->accumulate(dx);
        }
      });
  return {std::move(out), std::move(mu), std::move(var)};
}

// ---------------------------------------------------------------------------
// Tape

class Tape {
 public:
  // Collects every gradient-carrying operation reachable from `root`, in
  // execution order.
  explicit Tape(const Tensor& root) : root_(root.node()) {
    if (!root_->requires_grad) return;
    std::vector<detail::Node*> stack{root_.get()};
    std::unordered_set<detail::Node*> seen{root_.get()};
    while (!stack.empty()) {
      detail::Node* n = stack.back();
      stack.pop_back();
      nodes_.push_back(n);
      for (const auto& p : n->parents) {
        if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
      }
    }
    std::sort(nodes_.begin(), nodes_.end(),
              [](const detail::Node* a, const detail::Node* b) { return a->seq < b->seq; });
  }

  std::size_t size() const { return nodes_.size(); }

  std::vector<std::string_view> operation_names() const {
    std::vector<std::string_view> out;
    for (const auto* n : nodes_) out.push_back(n->op);
    return out;
  }

  // Seeds d(root)/d(root) = 1 and propagates in reverse execution order. Leaf
  // accumulators add to whatever they already hold.
  void backward() {
    if (root_->value.size() != 1) {
      throw ContractError("backward() requires a scalar loss, got " + detail::shape_str(root_->value));
    }
    if (!root_->requires_grad) return;
    for (auto* n : nodes_) {
      if (n->backward) n->grad.resize(0, 0);
    }
    root_->accumulate(Matrix::Ones(1, 1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      detail::Node* n = *it;
      if (n->backward && n->grad.size() != 0) n->backward(*n);
    }
    // Intermediate accumulators are scratch space.
    for (auto* n : nodes_) {
      if (n->backward) n->grad.resize(0, 0);
    }
  }

  // Zeroes gradient accumulators of the leaves on this tape; values untouched.
  void zero_grad() {
    for (auto* n : nodes_) {
      if (!n->backward && n->requires_grad) n->grad.setZero(n->value.rows(), n->value.cols());
    }
  }

 private:
  std::shared_ptr<detail::Node> root_;
  std::vector<detail::Node*> nodes_;
};

inline void backward(const Tensor& loss) { Tape(loss).backward(); }

}  // namespace armac3
