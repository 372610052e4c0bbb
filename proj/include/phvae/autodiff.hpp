#ifndef PHVAE_AUTODIFF_HPP
#define PHVAE_AUTODIFF_HPP

// Reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape records every operation of one forward pass. Values are stored as
// dynamic matrices; a rank tag distinguishes scalars (1x1), vectors (stored
// as a single row) and matrices. Batched data uses one row per sample.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "phvae/errors.hpp"

namespace phvae::ad {

enum class Rank { scalar = 0, vector = 1, matrix = 2 };

enum class Activation { relu, sigmoid, tanh };

/// Parses "relu", "sigmoid" or "tanh".
inline Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu, sigmoid or tanh)");
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

template <typename Scalar>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const { return tape_->value(id_); }
  Matrix grad() const { return tape_->grad(id_); }
  Rank rank() const { return tape_->rank(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Eigen::Index size() const { return value().size(); }

  /// Dimension list: {} for scalars, {k} for vectors, {r, c} for matrices.
  std::vector<Eigen::Index> shape() const {
    switch (rank()) {
      case Rank::scalar: return {};
      case Rank::vector: return {cols()};
      case Rank::matrix: return {rows(), cols()};
    }
    return {};
  }

  Scalar item() const { return value()(0, 0); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
std::string shape_string(const Var<Scalar>& v) {
  std::string s = "[";
  const auto dims = v.shape();
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

template <typename Scalar>
class Tape {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using BackwardRule = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf. Its gradient accumulates across backward() calls.
  Var<Scalar> leaf(Matrix value, Rank rank = Rank::matrix) {
    return push(std::move(value), rank, {}, nullptr, true);
  }
  /// Vector leaf, stored as a single row.
  Var<Scalar> vector_leaf(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
    return leaf(Matrix(v.transpose()), Rank::vector);
  }
  Var<Scalar> scalar_leaf(Scalar v) { return leaf(Matrix::Constant(1, 1, v), Rank::scalar); }

  /// Leaf that never receives a gradient (data, noise draws, targets).
  Var<Scalar> constant(Matrix value, Rank rank = Rank::matrix) {
    return push(std::move(value), rank, {}, nullptr, false);
  }

  /// Records a derived node. The rule reads grad(self) and accumulates into parents.
  Var<Scalar> push(Matrix value, Rank rank, std::vector<std::size_t> parents,
                   BackwardRule rule, bool leaf_requires_grad = false) {
    Node n;
    n.value = std::move(value);
    n.rank = rank;
    n.is_leaf = parents.empty();
    n.requires_grad = n.is_leaf ? leaf_requires_grad : false;
    for (auto p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    n.parents = std::move(parents);
    if (n.requires_grad && !n.is_leaf) n.backward = std::move(rule);
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  Rank rank(std::size_t id) const { return nodes_[id].rank; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

  /// Gradient buffer of a node; zeros when nothing has flowed into it yet.
  Matrix grad(std::size_t id) const {
    const Node& n = nodes_[id];
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }
  const Matrix& grad_ref(std::size_t id) const { return nodes_[id].grad; }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a scalar root. Interior adjoints are reset on every
  /// call; leaf gradients accumulate (+=) until zero_grads().
  void backward(const Var<Scalar>& root) {
    if (&root.tape() != this) throw DimensionError("backward: root belongs to a different tape");
    if (root.rank() != Rank::scalar) {
      throw DimensionError("backward: root must be scalar, got shape " + shape_string(root));
    }
    const std::size_t r = root.id();
    for (std::size_t i = 0; i <= r; ++i) {
      if (!nodes_[i].is_leaf) nodes_[i].grad.resize(0, 0);
    }
    accumulate(r, Matrix::Ones(1, 1));
    for (std::size_t i = r + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
  }

  void zero_grads() {
    for (auto& n : nodes_) n.grad.resize(0, 0);
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Rank rank = Rank::matrix;
    std::vector<std::size_t> parents;
    BackwardRule backward;
    bool is_leaf = true;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
void require_same_tape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (&a.tape() != &b.tape()) throw DimensionError(std::string(op) + ": operands live on different tapes");
}

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  require_same_tape(a, b, op);
  if (a.rank() != b.rank() || a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace detail

/// out = x W^T + b, row by row. x is a vector [m] or a batch [n x m];
/// W is [k x m]; b is a vector [k].
template <typename Scalar>
Var<Scalar> affine(const Var<Scalar>& x, const Var<Scalar>& W, const Var<Scalar>& b) {
  detail::require_same_tape(x, W, "affine");
  detail::require_same_tape(x, b, "affine");
  if (W.rank() != Rank::matrix || b.rank() != Rank::vector || x.rank() == Rank::scalar ||
      W.cols() != x.cols() || b.cols() != W.rows()) {
    throw DimensionError("affine: x " + shape_string(x) + " does not conform with W " +
                         shape_string(W) + " and b " + shape_string(b));
  }
  using Matrix = typename Tape<Scalar>::Matrix;
  Matrix out = x.value() * W.value().transpose();
  out.rowwise() += b.value().row(0);
  const std::size_t xi = x.id(), wi = W.id(), bi = b.id();
  return x.tape().push(std::move(out), x.rank(), {xi, wi, bi},
                       [xi, wi, bi](Tape<Scalar>& t, std::size_t self) {
                         const Matrix& g = t.grad_ref(self);
                         if (t.requires_grad(xi)) t.accumulate(xi, g * t.value(wi));
                         if (t.requires_grad(wi)) t.accumulate(wi, g.transpose() * t.value(xi));
                         if (t.requires_grad(bi)) t.accumulate(bi, g.colwise().sum());
                       });
}

template <typename Scalar>
Var<Scalar> activation(const Var<Scalar>& x, Activation kind) {
  using Matrix = typename Tape<Scalar>::Matrix;
  const std::size_t xi = x.id();
  switch (kind) {
    case Activation::relu: {
      Matrix y = x.value().cwiseMax(Scalar(0));
      return x.tape().push(std::move(y), x.rank(), {xi}, [xi](Tape<Scalar>& t, std::size_t self) {
        const Matrix mask = (t.value(xi).array() > Scalar(0)).template cast<Scalar>().matrix();
        t.accumulate(xi, t.grad_ref(self).cwiseProduct(mask));
      });
    }
    case Activation::sigmoid: {
      Matrix y = x.value().unaryExpr([](Scalar v) { return detail::stable_sigmoid(v); });
      return x.tape().push(std::move(y), x.rank(), {xi}, [xi](Tape<Scalar>& t, std::size_t self) {
        const auto y = t.value(self).array();
        t.accumulate(xi, (t.grad_ref(self).array() * y * (Scalar(1) - y)).matrix());
      });
    }
    case Activation::tanh: {
      Matrix y = x.value().array().tanh().matrix();
      return x.tape().push(std::move(y), x.rank(), {xi}, [xi](Tape<Scalar>& t, std::size_t self) {
        const auto y = t.value(self).array();
        t.accumulate(xi, (t.grad_ref(self).array() * (Scalar(1) - y.square())).matrix());
      });
    }
  }
  throw ConfigError("activation: invalid kind");
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) { return activation(x, Activation::relu); }
template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) { return activation(x, Activation::sigmoid); }
template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) { return activation(x, Activation::tanh); }

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "add");
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().push(a.value() + b.value(), a.rank(), {ai, bi},
                       [ai, bi](Tape<Scalar>& t, std::size_t self) {
                         t.accumulate(ai, t.grad_ref(self));
                         t.accumulate(bi, t.grad_ref(self));
                       });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "sub");
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().push(a.value() - b.value(), a.rank(), {ai, bi},
                       [ai, bi](Tape<Scalar>& t, std::size_t self) {
                         t.accumulate(ai, t.grad_ref(self));
                         t.accumulate(bi, -t.grad_ref(self));
                       });
}

/// Elementwise (Hadamard) product.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "mul");
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape().push(a.value().cwiseProduct(b.value()), a.rank(), {ai, bi},
                       [ai, bi](Tape<Scalar>& t, std::size_t self) {
                         const auto& g = t.grad_ref(self);
                         if (t.requires_grad(ai)) t.accumulate(ai, g.cwiseProduct(t.value(bi)));
                         if (t.requires_grad(bi)) t.accumulate(bi, g.cwiseProduct(t.value(ai)));
                       });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, Scalar c) {
  const std::size_t ai = a.id();
  typename Tape<Scalar>::Matrix out = (a.value().array() + c).matrix();
  return a.tape().push(std::move(out), a.rank(), {ai}, [ai](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(ai, t.grad_ref(self));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar c) {
  const std::size_t ai = a.id();
  return a.tape().push(a.value() * c, a.rank(), {ai}, [ai, c](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(ai, t.grad_ref(self) * c);
  });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  const std::size_t ai = a.id();
  typename Tape<Scalar>::Matrix out = a.value().array().exp().matrix();
  return a.tape().push(std::move(out), a.rank(), {ai}, [ai](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(ai, t.grad_ref(self).cwiseProduct(t.value(self)));
  });
}

/// Natural log. Throws DomainError carrying the row-major index of the first
/// non-positive entry.
template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  const auto& v = a.value();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (!(v(r, c) > Scalar(0))) {
        const auto index = static_cast<std::size_t>(r * v.cols() + c);
        throw DomainError("log: non-positive input at index " + std::to_string(index), index);
      }
    }
  }
  const std::size_t ai = a.id();
  typename Tape<Scalar>::Matrix out = v.array().log().matrix();
  return a.tape().push(std::move(out), a.rank(), {ai}, [ai](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(ai, t.grad_ref(self).cwiseQuotient(t.value(ai)));
  });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a) {
  const std::size_t ai = a.id();
  return a.tape().push(a.value().cwiseAbs2(), a.rank(), {ai}, [ai](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(ai, Scalar(2) * t.grad_ref(self).cwiseProduct(t.value(ai)));
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, Scalar c) { return add(a, c); }
template <typename Scalar>
Var<Scalar> operator+(Scalar c, const Var<Scalar>& a) { return add(a, c); }
template <typename Scalar>
Var<Scalar> operator*(Scalar c, const Var<Scalar>& a) { return scale(a, c); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, Scalar c) { return scale(a, c); }

/// Sum of all entries, as a scalar node.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  using Matrix = typename Tape<Scalar>::Matrix;
  const std::size_t xi = x.id();
  const Eigen::Index r = x.rows(), c = x.cols();
  return x.tape().push(Matrix::Constant(1, 1, x.value().sum()), Rank::scalar, {xi},
                       [xi, r, c](Tape<Scalar>& t, std::size_t self) {
                         t.accumulate(xi, Matrix::Constant(r, c, t.grad_ref(self)(0, 0)));
                       });
}

/// Sum of squared differences, as a scalar node.
template <typename Scalar>
Var<Scalar> mse_sum(const Var<Scalar>& x, const Var<Scalar>& target) {
  detail::require_same_shape(x, target, "mse_sum");
  using Matrix = typename Tape<Scalar>::Matrix;
  const std::size_t xi = x.id(), ti = target.id();
  const Scalar value = (x.value() - target.value()).squaredNorm();
  return x.tape().push(Matrix::Constant(1, 1, value), Rank::scalar, {xi, ti},
                       [xi, ti](Tape<Scalar>& t, std::size_t self) {
                         const Scalar g = t.grad_ref(self)(0, 0);
                         const Matrix d = Scalar(2) * g * (t.value(xi) - t.value(ti));
                         t.accumulate(xi, d);
                         t.accumulate(ti, -d);
                       });
}

/// out = log(sum_s exp(v_s)) - log S, elementwise over S equally shaped
/// branches. The running maximum is subtracted before exponentiating and the
/// 1/S factor is applied inside the log, so equal branches return their
/// common value exactly.
template <typename Scalar>
Var<Scalar> logsumexp_branches(std::span<const Var<Scalar>> branches) {
  using Matrix = typename Tape<Scalar>::Matrix;
  if (branches.empty()) throw DimensionError("logsumexp_branches: empty branch list");
  for (const auto& b : branches) detail::require_same_shape(branches.front(), b, "logsumexp_branches");

  const auto count = static_cast<Scalar>(branches.size());
  Matrix peak = branches.front().value();
  for (const auto& b : branches.subspan(1)) peak = peak.cwiseMax(b.value());
  Matrix total = Matrix::Zero(peak.rows(), peak.cols());
  for (const auto& b : branches) total.array() += (b.value() - peak).array().exp();
  Matrix out = (peak.array() + (total.array() / count).log()).matrix();

  std::vector<std::size_t> ids;
  ids.reserve(branches.size());
  for (const auto& b : branches) ids.push_back(b.id());
  Tape<Scalar>& tape = branches.front().tape();
  return tape.push(std::move(out), branches.front().rank(), ids,
                   [ids, count](Tape<Scalar>& t, std::size_t self) {
                     // d out / d v_s = exp(v_s - out) / S
                     const auto& g = t.grad_ref(self);
                     const auto& out = t.value(self);
                     for (auto id : ids) {
                       if (!t.requires_grad(id)) continue;
                       const Matrix w = ((t.value(id) - out).array().exp() / count).matrix();
                       t.accumulate(id, g.cwiseProduct(w));
                     }
                   });
}

template <typename Scalar>
Var<Scalar> logsumexp_branches(const std::vector<Var<Scalar>>& branches) {
  return logsumexp_branches(std::span<const Var<Scalar>>(branches));
}

template <typename Scalar>
void backward(const Var<Scalar>& root) {
  root.tape().backward(root);
}

}  // namespace phvae::ad

#endif  // PHVAE_AUTODIFF_HPP
