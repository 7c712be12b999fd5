#pragma once

#include "tanp/kernel/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tanp::ad {

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  const MatrixX<Scalar>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const {
    if (rows() != 1 || cols() != 1) throw std::logic_error("Var is not a scalar: " + shape_string(value()));
    return value()(0, 0);
  }

  Tape<Scalar>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

/// Linear record of a forward computation. Gradients are obtained by a
/// single reverse sweep in `backward`; nodes whose inputs are all constants
/// carry no gradient.
template <typename Scalar>
class Tape {
 public:
  using Matrix = MatrixX<Scalar>;
  /// Receives the gradient of the node's output and pushes contributions to
  /// its inputs through `accumulate`.
  using BackwardFn = std::function<void(const Matrix& out_grad, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Matrix value) { return push(std::move(value), false, nullptr); }

  /// Free leaf with a gradient slot (useful for checking ops in isolation).
  Var<Scalar> variable(Matrix value) { return push(std::move(value), true, nullptr); }

  /// Leaf bound to a named parameter. Repeated requests return the same node
  /// so contributions from every use accumulate into one gradient.
  Var<Scalar> parameter(const ParameterStore<Scalar>& store, const std::string& name) {
    auto it = parameters_.find(name);
    if (it != parameters_.end()) return Var<Scalar>(this, it->second);
    auto v = push(store.value(name), store.trainable(name), nullptr);
    parameters_.emplace(name, v.id());
    return v;
  }

  /// Record a derived value. `backward` is dropped when no input needs a gradient.
  Var<Scalar> record(Matrix value, std::initializer_list<Var<Scalar>> inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id()].needs_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }
  Var<Scalar> record(Matrix value, const std::vector<Var<Scalar>>& inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id()].needs_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  const Matrix& value(int id) const { return nodes_.at(id).value; }
  bool needs_grad(const Var<Scalar>& v) const { return nodes_.at(v.id()).needs_grad; }

  void accumulate(const Var<Scalar>& v, const Matrix& contribution) {
    auto& node = nodes_[v.id()];
    if (!node.needs_grad) return;
    if (node.grad.size() == 0) {
      node.grad = contribution;
    } else {
      node.grad += contribution;
    }
  }

  /// Reverse sweep from a 1x1 loss.
  void backward(const Var<Scalar>& loss) {
    check_owner(loss);
    const auto& lv = value(loss.id());
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw std::logic_error("backward requires a scalar loss, got " + shape_string(lv));
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (int id = loss.id(); id >= 0; --id) {
      auto& node = nodes_[id];
      if (!node.backward || node.grad.size() == 0) continue;
      node.backward(node.grad, *this);
    }
  }

  /// Gradient of the last `backward` loss w.r.t. a node; zeros when untouched.
  Matrix grad(const Var<Scalar>& v) const {
    const auto& node = nodes_.at(v.id());
    if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  /// One entry per trainable parameter in `store`; untouched parameters map to zero.
  GradientSet<Scalar> gradients(const ParameterStore<Scalar>& store) const {
    GradientSet<Scalar> out;
    for (const auto& [name, entry] : store) {
      if (!entry.trainable) continue;
      auto it = parameters_.find(name);
      if (it == parameters_.end()) {
        out.emplace(name, Matrix::Zero(entry.value.rows(), entry.value.cols()));
      } else {
        out.emplace(name, grad(Var<Scalar>(const_cast<Tape*>(this), it->second)));
      }
    }
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool needs_grad = false;
  };

  Var<Scalar> push(Matrix value, bool needs_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), needs_grad});
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  void check_owner(const Var<Scalar>& v) const {
    if (v.tape() != this) throw std::logic_error("Var recorded on a different tape");
  }

  std::deque<Node> nodes_;
  std::unordered_map<std::string, int> parameters_;
};

/// Run the reverse sweep and collect gradients for every trainable parameter.
template <typename Scalar>
GradientSet<Scalar> backward(const Var<Scalar>& loss, const ParameterStore<Scalar>& params) {
  loss.tape()->backward(loss);
  return loss.tape()->gradients(params);
}

namespace detail {

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.value()) +
                                " vs " + shape_string(b.value()));
  }
}

template <typename Scalar>
void require_row(const Var<Scalar>& x, const Var<Scalar>& row, const char* op) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw std::invalid_argument(std::string(op) + ": expected row vector [1x" + std::to_string(x.cols()) +
                                "], got " + shape_string(row.value()));
  }
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch " + shape_string(a.value()) + " x " +
                                shape_string(b.value()));
  }
  MatrixX<Scalar> out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  MatrixX<Scalar> out = a.value().transpose();
  return a.tape()->record(std::move(out), {a}, [a](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g.transpose());
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "add");
  MatrixX<Scalar> out = a.value() + b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "sub");
  MatrixX<Scalar> out = a.value() - b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

/// Elementwise (Hadamard) product.
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "mul");
  MatrixX<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  MatrixX<Scalar> out = a.value() * s;
  return a.tape()->record(std::move(out), {a}, [a, s](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g * s);
  });
}

/// x + row, with the 1xn row broadcast over every row of x.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& x, const Var<Scalar>& row) {
  detail::require_row(x, row, "add_row");
  MatrixX<Scalar> out = x.value().rowwise() + row.value().row(0);
  return x.tape()->record(std::move(out), {x, row}, [x, row](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(x, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

/// x * row elementwise, with the 1xn row broadcast over every row of x.
template <typename Scalar>
Var<Scalar> mul_row(const Var<Scalar>& x, const Var<Scalar>& row) {
  detail::require_row(x, row, "mul_row");
  MatrixX<Scalar> out = x.value().array().rowwise() * row.value().row(0).array();
  return x.tape()->record(std::move(out), {x, row}, [x, row](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    if (t.needs_grad(x)) {
      MatrixX<Scalar> gx = g.array().rowwise() * row.value().row(0).array();
      t.accumulate(x, gx);
    }
    if (t.needs_grad(row)) t.accumulate(row, g.cwiseProduct(x.value()).colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  MatrixX<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape()->record(std::move(out), {a}, [a](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    MatrixX<Scalar> mask = (a.value().array() > Scalar(0)).template cast<Scalar>();
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  // Branches keep exp() from overflowing for large |x|.
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  MatrixX<Scalar> out = a.value().unaryExpr([](Scalar x) { return logistic(x); });
  auto* tape = a.tape();
  const int out_id = static_cast<int>(tape->size());
  return tape->record(std::move(out), {a}, [a, out_id](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    const auto& y = t.value(out_id);
    t.accumulate(a, g.cwiseProduct(y.cwiseProduct((Scalar(1) - y.array()).matrix())));
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  MatrixX<Scalar> out = a.value().array().tanh().matrix();
  auto* tape = a.tape();
  const int out_id = static_cast<int>(tape->size());
  return tape->record(std::move(out), {a}, [a, out_id](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    const auto& y = t.value(out_id);
    t.accumulate(a, g.cwiseProduct((Scalar(1) - y.array().square()).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  MatrixX<Scalar> out = a.value().array().exp().matrix();
  auto* tape = a.tape();
  const int out_id = static_cast<int>(tape->size());
  return tape->record(std::move(out), {a}, [a, out_id](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, g.cwiseProduct(t.value(out_id)));
  });
}

/// Elementwise clamp; gradient is zero wherever the bound is active.
template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& a, Scalar lo, Scalar hi) {
  MatrixX<Scalar> out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape()->record(std::move(out), {a}, [a, lo, hi](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    MatrixX<Scalar> mask = ((a.value().array() >= lo) && (a.value().array() <= hi)).template cast<Scalar>();
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

/// Rows of `a` selected by index (repeats allowed). Row lookup equals
/// multiplication by a stacked one-hot matrix.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, std::vector<Eigen::Index> rows) {
  MatrixX<Scalar> out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                              shape_string(a.value()));
    }
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  return a.tape()->record(std::move(out), {a},
                          [a, rows = std::move(rows)](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
                            MatrixX<Scalar> ga = MatrixX<Scalar>::Zero(a.rows(), a.cols());
                            for (std::size_t i = 0; i < rows.size(); ++i) {
                              ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
                            }
                            t.accumulate(a, ga);
                          });
}

/// Horizontal concatenation [a | b | ...]; all parts share the row count.
template <typename Scalar>
Var<Scalar> hcat(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw std::invalid_argument("hcat: row mismatch " + shape_string(parts.front().value()) + " vs " +
                                  shape_string(p.value()));
    }
    cols += p.cols();
  }
  MatrixX<Scalar> out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return parts.front().tape()->record(std::move(out), parts,
                                      [parts](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
                                        Eigen::Index off = 0;
                                        for (const auto& p : parts) {
                                          if (t.needs_grad(p)) t.accumulate(p, g.middleCols(off, p.cols()));
                                          off += p.cols();
                                        }
                                      });
}

/// Vertical stacking; all parts share the column count.
template <typename Scalar>
Var<Scalar> vcat(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw std::invalid_argument("vcat: column mismatch " + shape_string(parts.front().value()) + " vs " +
                                  shape_string(p.value()));
    }
    rows += p.rows();
  }
  MatrixX<Scalar> out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return parts.front().tape()->record(std::move(out), parts,
                                      [parts](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
                                        Eigen::Index off = 0;
                                        for (const auto& p : parts) {
                                          if (t.needs_grad(p)) t.accumulate(p, g.middleRows(off, p.rows()));
                                          off += p.rows();
                                        }
                                      });
}

/// Broadcast a 1xn row to n_rows x n.
template <typename Scalar>
Var<Scalar> repeat_rows(const Var<Scalar>& row, Eigen::Index n_rows) {
  if (row.rows() != 1) throw std::invalid_argument("repeat_rows: expected a row, got " + shape_string(row.value()));
  MatrixX<Scalar> out = row.value().replicate(n_rows, 1);
  return row.tape()->record(std::move(out), {row}, [row](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(row, g.colwise().sum());
  });
}

/// Column-wise mean over rows. Rows are summed in lexicographic order of
/// their values, so the result is bit-identical under any row permutation.
template <typename Scalar>
Var<Scalar> mean_rows(const Var<Scalar>& a) {
  const auto& x = a.value();
  if (x.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::sort(order.begin(), order.end(), [&x](Eigen::Index i, Eigen::Index j) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (x(i, c) < x(j, c)) return true;
      if (x(j, c) < x(i, c)) return false;
    }
    return false;
  });
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(1, x.cols());
  for (auto i : order) out.row(0) += x.row(i);
  out /= static_cast<Scalar>(x.rows());
  return a.tape()->record(std::move(out), {a}, [a](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    const Scalar n = static_cast<Scalar>(a.rows());
    t.accumulate(a, (g / n).replicate(a.rows(), 1));
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](const MatrixX<Scalar>& g, Tape<Scalar>& t) {
    t.accumulate(a, MatrixX<Scalar>::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

enum class Activation { relu, sigmoid, tanh };

template <typename Scalar>
Var<Scalar> activate(const Var<Scalar>& x, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return relu(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::tanh:
      return tanh(x);
  }
  throw std::invalid_argument("unknown activation");
}

}  // namespace tanp::ad
