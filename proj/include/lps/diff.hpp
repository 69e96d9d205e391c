#ifndef LPS_DIFF_HPP
#define LPS_DIFF_HPP

// Tape-based reverse-mode differentiation over dense Eigen matrices.
//
// Every recorded value is a matrix; scalars are 1x1. Elementwise binary ops
// broadcast along any dimension of extent 1, so a 1x1 parameter combines with a
// batch column and a 1xn bias row combines with a batch matrix. The reverse
// sweep sums adjoints back over broadcast dimensions.

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "lps/errors.hpp"

namespace lps {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

class Tape;

// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Value of a 1x1 node.
  Scalar scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Adjoints produced by one reverse sweep. Indexing a node that the output does
// not depend on yields zeros of the node's shape.
class Gradients {
 public:
  Matrix operator[](const Var& v) const;
  // Number of tape nodes the sweep walked over.
  std::size_t visited() const { return visited_; }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<Matrix> adjoint_;
  std::vector<std::uint8_t> present_;
  std::size_t visited_ = 0;
};

class Tape {
 public:
  // Receives the adjoint of the node and one slot per operand; a slot is null
  // when that operand does not need a gradient. Slots arrive zero-initialised
  // with the operand's shape and must be accumulated into.
  using Pullback = std::function<void(const Tape&, const Matrix& adjoint, std::span<Matrix* const> operand_adjoints)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.
  Var leaf(Matrix value);
  Var leaf(Scalar value);
  // Input that never receives a gradient.
  Var constant(Matrix value);
  Var constant(Scalar value);

  // Records an operation. At most three operands.
  Var record(Matrix value, std::span<const Var> operands, Pullback pullback);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Seeds the adjoint of `output` with ones and sweeps every node at or before
  // it exactly once, in reverse recording order. Node values are untouched.
  Gradients backward(const Var& output) const;

 private:
  struct Node {
    Matrix value;
    std::array<std::size_t, 3> operands{};
    std::uint8_t arity = 0;
    bool needs_grad = false;
    Pullback pullback;
  };

  std::vector<Node> nodes_;
};

// Elementary operations ------------------------------------------------------

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var operator+(const Var& a, Scalar b);
Var operator+(Scalar a, const Var& b);
Var operator-(const Var& a, Scalar b);
Var operator-(Scalar a, const Var& b);
Var operator*(const Var& a, Scalar b);
Var operator*(Scalar a, const Var& b);
Var operator/(const Var& a, Scalar b);
Var operator/(Scalar a, const Var& b);

Var exp(const Var& x);
Var log(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var tanh(const Var& x);
Var log1p(const Var& x);
Var expm1(const Var& x);
Var sqrt(const Var& x);
Var square(const Var& x);
Var pow(const Var& base, Scalar exponent);
Var pow(const Var& base, const Var& exponent);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var leaky_relu(const Var& x, Scalar slope = 0.01);
// log Γ(x) elementwise; the adjoint uses the derivative of the same
// approximation (see special.hpp).
Var lgamma(const Var& x);
// log(exp(a) + exp(b)) without overflow.
Var logaddexp(const Var& a, const Var& b);

// Matrix product.
Var dot(const Var& a, const Var& b);
// x * w + b, with b a 1 x cols(w) row broadcast over the rows of x.
Var affine(const Var& x, const Var& w, const Var& b);

// Sum of all entries (1x1).
Var sum(const Var& x);
// Per-row sum (rows x 1).
Var row_sum(const Var& x);
// Columns [start, start + count).
Var cols(const Var& x, Eigen::Index start, Eigen::Index count);
Var col(const Var& x, Eigen::Index j);
// Horizontal concatenation of equal-height blocks.
Var hcat(std::span<const Var> blocks);
// Column-major view of `count = rows*cols` entries of a flat n x 1 vector.
Var reshape(const Var& flat, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols);

enum class OpKind : std::uint8_t {
  add, sub, mul, div, neg, exp, log, sin, cos, pow, sigmoid, relu, leaky_relu, dot, affine
};

std::string_view op_name(OpKind kind);
std::size_t op_arity(OpKind kind);
// Dispatches to the named operation. `pow` uses both operands as Vars.
Var apply_elementary(OpKind kind, std::span<const Var> operands);

// Max over coordinates of |analytic - central difference| / (|analytic| + 1e-12)
// for a scalar-valued function of an n x 1 vector.
Scalar finite_diff_check(const std::function<Var(const Var&)>& f, const Vector& point, Scalar h = 1e-5);

// Relative error of the directional derivative along `direction`, compared
// with a central difference. Used for high-dimensional parameter blocks.
Scalar directional_diff_check(const std::function<Var(const Var&)>& f, const Vector& point, const Vector& direction,
                              Scalar h = 1e-5);

}  // namespace lps

#endif
