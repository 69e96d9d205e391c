#include "lps/diff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "lps/special.hpp"

namespace lps {

// Var / Gradients -------------------------------------------------------------

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw UsageError("Var: not attached to a tape");
  return tape_->value(id_);
}

Scalar Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) {
    std::ostringstream os;
    os << "Var::scalar: node is " << v.rows() << "x" << v.cols();
    throw UsageError(os.str());
  }
  return v(0, 0);
}

Matrix Gradients::operator[](const Var& v) const {
  if (v.tape() != tape_) throw UsageError("Gradients: variable belongs to a different tape");
  if (v.id() < present_.size() && present_[v.id()]) return adjoint_[v.id()];
  const Matrix& value = tape_->value(v.id());
  return Matrix::Zero(value.rows(), value.cols());
}

// Tape ------------------------------------------------------------------------

Var Tape::leaf(Matrix value) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Scalar value) { return leaf(Matrix::Constant(1, 1, value)); }

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Scalar value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::record(Matrix value, std::span<const Var> operands, Pullback pullback) {
  if (operands.size() > 3) throw UsageError("Tape::record: at most three operands");
  Node node;
  node.value = std::move(value);
  node.arity = static_cast<std::uint8_t>(operands.size());
  for (std::size_t i = 0; i < operands.size(); ++i) {
    if (operands[i].tape() != this) throw UsageError("Tape::record: operand recorded on a different tape");
    node.operands[i] = operands[i].id();
    node.needs_grad = node.needs_grad || nodes_[operands[i].id()].needs_grad;
  }
  if (node.needs_grad) node.pullback = std::move(pullback);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Gradients Tape::backward(const Var& output) const {
  if (output.tape() != this || output.id() >= nodes_.size())
    throw UsageError("Tape::backward: output was not recorded on this tape");
  Gradients grads;
  grads.tape_ = this;
  const std::size_t n = output.id() + 1;
  grads.adjoint_.resize(n);
  grads.present_.assign(n, 0);
  const Matrix& out = nodes_[output.id()].value;
  grads.adjoint_[output.id()] = Matrix::Ones(out.rows(), out.cols());
  grads.present_[output.id()] = 1;

  std::array<Matrix*, 3> slots{};
  for (std::size_t k = n; k-- > 0;) {
    ++grads.visited_;
    const Node& node = nodes_[k];
    if (!grads.present_[k] || node.arity == 0 || !node.pullback) continue;
    for (std::size_t i = 0; i < node.arity; ++i) {
      const std::size_t op = node.operands[i];
      if (!nodes_[op].needs_grad) {
        slots[i] = nullptr;
        continue;
      }
      if (!grads.present_[op]) {
        grads.adjoint_[op] = Matrix::Zero(nodes_[op].value.rows(), nodes_[op].value.cols());
        grads.present_[op] = 1;
      }
      slots[i] = &grads.adjoint_[op];
    }
    node.pullback(*this, grads.adjoint_[k], std::span<Matrix* const>(slots.data(), node.arity));
  }
  return grads;
}

// Helpers ---------------------------------------------------------------------

namespace {

[[noreturn]] void domain_error(std::string_view op, Scalar offending) {
  std::ostringstream os;
  os << op << ": operand " << offending << " outside the domain";
  throw DomainError(os.str());
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw UsageError("operation on a detached Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw UsageError("operands recorded on different tapes");
  return tape_of(a);
}

Eigen::Index broadcast_dim(Eigen::Index a, Eigen::Index b, std::string_view op) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  std::ostringstream os;
  os << op << ": cannot broadcast extents " << a << " and " << b;
  throw UsageError(os.str());
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums `g` down to the shape (rows, cols) it was broadcast from.
void accumulate_reduced(Matrix& target, const Matrix& g) {
  if (target.rows() == g.rows() && target.cols() == g.cols()) {
    target += g;
  } else if (target.rows() == 1 && target.cols() == 1) {
    target(0, 0) += g.sum();
  } else if (target.rows() == 1) {
    target += g.colwise().sum();
  } else {
    target += g.rowwise().sum();
  }
}

// Elementwise unary op: value = f(x), local derivative = df(x, value).
template <typename F, typename DF>
Var unary(const Var& x, F f, DF df) {
  Tape& t = tape_of(x);
  Matrix value = x.value().unaryExpr(f);
  const std::size_t xi = x.id();
  const Var ops[] = {x};
  const std::size_t self = t.size();
  return t.record(std::move(value), ops,
                  [xi, self, df](const Tape& tape, const Matrix& g, std::span<Matrix* const> adj) {
                    const Matrix& xv = tape.value(xi);
                    const Matrix& yv = tape.value(self);
                    *adj[0] += g.cwiseProduct(xv.binaryExpr(yv, df));
                  });
}

void check_all(const Matrix& m, std::string_view op, bool (*ok)(Scalar)) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (!ok(m.data()[i])) domain_error(op, m.data()[i]);
}

enum class Binary { add, sub, mul, div };

Var binary(const Var& a, const Var& b, Binary kind) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  static constexpr std::string_view names[] = {"add", "sub", "mul", "div"};
  const Eigen::Index rows = broadcast_dim(av.rows(), bv.rows(), names[static_cast<int>(kind)]);
  const Eigen::Index cols = broadcast_dim(av.cols(), bv.cols(), names[static_cast<int>(kind)]);
  if (kind == Binary::div) check_all(bv, "div", [](Scalar v) { return v != 0.0; });

  Matrix value;
  const bool same = av.rows() == bv.rows() && av.cols() == bv.cols();
  if (same) {
    switch (kind) {
      case Binary::add: value = av + bv; break;
      case Binary::sub: value = av - bv; break;
      case Binary::mul: value = av.cwiseProduct(bv); break;
      case Binary::div: value = av.cwiseQuotient(bv); break;
    }
  } else {
    const Matrix ea = expand(av, rows, cols);
    const Matrix eb = expand(bv, rows, cols);
    switch (kind) {
      case Binary::add: value = ea + eb; break;
      case Binary::sub: value = ea - eb; break;
      case Binary::mul: value = ea.cwiseProduct(eb); break;
      case Binary::div: value = ea.cwiseQuotient(eb); break;
    }
  }

  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  const Var ops[] = {a, b};
  return t.record(std::move(value), ops,
                  [ai, bi, kind, rows, cols](const Tape& tape, const Matrix& g, std::span<Matrix* const> adj) {
                    switch (kind) {
                      case Binary::add:
                        if (adj[0]) accumulate_reduced(*adj[0], g);
                        if (adj[1]) accumulate_reduced(*adj[1], g);
                        break;
                      case Binary::sub:
                        if (adj[0]) accumulate_reduced(*adj[0], g);
                        if (adj[1]) accumulate_reduced(*adj[1], -g);
                        break;
                      case Binary::mul: {
                        const Matrix ea = expand(tape.value(ai), rows, cols);
                        const Matrix eb = expand(tape.value(bi), rows, cols);
                        if (adj[0]) accumulate_reduced(*adj[0], g.cwiseProduct(eb));
                        if (adj[1]) accumulate_reduced(*adj[1], g.cwiseProduct(ea));
                        break;
                      }
                      case Binary::div: {
                        const Matrix ea = expand(tape.value(ai), rows, cols);
                        const Matrix eb = expand(tape.value(bi), rows, cols);
                        const Matrix ga = g.cwiseQuotient(eb);
                        if (adj[0]) accumulate_reduced(*adj[0], ga);
                        if (adj[1]) accumulate_reduced(*adj[1], -ga.cwiseProduct(ea).cwiseQuotient(eb));
                        break;
                      }
                    }
                  });
}

Var scalar_constant(const Var& like, Scalar v) { return tape_of(like).constant(v); }

}  // namespace

// Arithmetic ------------------------------------------------------------------

Var operator+(const Var& a, const Var& b) { return binary(a, b, Binary::add); }
Var operator-(const Var& a, const Var& b) { return binary(a, b, Binary::sub); }
Var operator*(const Var& a, const Var& b) { return binary(a, b, Binary::mul); }
Var operator/(const Var& a, const Var& b) { return binary(a, b, Binary::div); }

Var operator-(const Var& a) {
  return unary(a, [](Scalar x) { return -x; }, [](Scalar, Scalar) { return -1.0; });
}

Var operator+(const Var& a, Scalar b) {
  return unary(a, [b](Scalar x) { return x + b; }, [](Scalar, Scalar) { return 1.0; });
}
Var operator+(Scalar a, const Var& b) { return b + a; }
Var operator-(const Var& a, Scalar b) { return a + (-b); }
Var operator-(Scalar a, const Var& b) {
  return unary(b, [a](Scalar x) { return a - x; }, [](Scalar, Scalar) { return -1.0; });
}
Var operator*(const Var& a, Scalar b) {
  return unary(a, [b](Scalar x) { return x * b; }, [b](Scalar, Scalar) { return b; });
}
Var operator*(Scalar a, const Var& b) { return b * a; }
Var operator/(const Var& a, Scalar b) {
  if (b == 0.0) domain_error("div", b);
  return a * (1.0 / b);
}
Var operator/(Scalar a, const Var& b) { return binary(scalar_constant(b, a), b, Binary::div); }

// Elementwise functions -------------------------------------------------------

Var exp(const Var& x) {
  return unary(x, [](Scalar v) { return std::exp(v); }, [](Scalar, Scalar y) { return y; });
}

Var log(const Var& x) {
  check_all(x.value(), "log", [](Scalar v) { return v > 0.0; });
  return unary(x, [](Scalar v) { return std::log(v); }, [](Scalar v, Scalar) { return 1.0 / v; });
}

Var sin(const Var& x) {
  return unary(x, [](Scalar v) { return std::sin(v); }, [](Scalar v, Scalar) { return std::cos(v); });
}

Var cos(const Var& x) {
  return unary(x, [](Scalar v) { return std::cos(v); }, [](Scalar v, Scalar) { return -std::sin(v); });
}

Var tanh(const Var& x) {
  return unary(x, [](Scalar v) { return std::tanh(v); }, [](Scalar, Scalar y) { return 1.0 - y * y; });
}

Var log1p(const Var& x) {
  check_all(x.value(), "log1p", [](Scalar v) { return v > -1.0; });
  return unary(x, [](Scalar v) { return std::log1p(v); }, [](Scalar v, Scalar) { return 1.0 / (1.0 + v); });
}

Var expm1(const Var& x) {
  return unary(x, [](Scalar v) { return std::expm1(v); }, [](Scalar, Scalar y) { return y + 1.0; });
}

Var sqrt(const Var& x) {
  check_all(x.value(), "sqrt", [](Scalar v) { return v > 0.0; });
  return unary(x, [](Scalar v) { return std::sqrt(v); }, [](Scalar, Scalar y) { return 0.5 / y; });
}

Var square(const Var& x) {
  return unary(x, [](Scalar v) { return v * v; }, [](Scalar v, Scalar) { return 2.0 * v; });
}

Var pow(const Var& base, Scalar exponent) {
  if (exponent != std::floor(exponent)) check_all(base.value(), "pow", [](Scalar v) { return v > 0.0; });
  return unary(
      base, [exponent](Scalar v) { return std::pow(v, exponent); },
      [exponent](Scalar v, Scalar) { return exponent * std::pow(v, exponent - 1.0); });
}

Var pow(const Var& base, const Var& exponent) {
  check_all(base.value(), "pow", [](Scalar v) { return v > 0.0; });
  return exp(exponent * log(base));
}

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](Scalar v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const Scalar e = std::exp(v);
        return e / (1.0 + e);
      },
      [](Scalar, Scalar y) { return y * (1.0 - y); });
}

Var relu(const Var& x) {
  return unary(x, [](Scalar v) { return v > 0.0 ? v : 0.0; }, [](Scalar v, Scalar) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& x, Scalar slope) {
  return unary(
      x, [slope](Scalar v) { return v > 0.0 ? v : slope * v; },
      [slope](Scalar v, Scalar) { return v > 0.0 ? 1.0 : slope; });
}

Var lgamma(const Var& x) {
  check_all(x.value(), "lgamma", [](Scalar v) { return v > 0.0; });
  return unary(x, [](Scalar v) { return lps::lgamma(v); }, [](Scalar v, Scalar) { return lps::digamma(v); });
}

Var logaddexp(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  const Eigen::Index rows = broadcast_dim(a.rows(), b.rows(), "logaddexp");
  const Eigen::Index cols = broadcast_dim(a.cols(), b.cols(), "logaddexp");
  const Matrix ea = expand(a.value(), rows, cols);
  const Matrix eb = expand(b.value(), rows, cols);
  Matrix value = ea.binaryExpr(eb, [](Scalar u, Scalar v) {
    const Scalar hi = std::max(u, v);
    if (hi == -std::numeric_limits<Scalar>::infinity()) return hi;
    return hi + std::log1p(std::exp(-std::abs(u - v)));
  });
  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  const std::size_t self = t.size();
  const Var ops[] = {a, b};
  return t.record(std::move(value), ops,
                  [ai, bi, self, rows, cols](const Tape& tape, const Matrix& g, std::span<Matrix* const> adj) {
                    const Matrix& y = tape.value(self);
                    if (adj[0]) {
                      const Matrix wa = (expand(tape.value(ai), rows, cols) - y).array().exp().matrix();
                      accumulate_reduced(*adj[0], g.cwiseProduct(wa));
                    }
                    if (adj[1]) {
                      const Matrix wb = (expand(tape.value(bi), rows, cols) - y).array().exp().matrix();
                      accumulate_reduced(*adj[1], g.cwiseProduct(wb));
                    }
                  });
}

// Linear algebra and reshaping ------------------------------------------------

Var dot(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "dot: inner dimensions differ (" << a.rows() << "x" << a.cols() << " * " << b.rows() << "x" << b.cols()
       << ")";
    throw UsageError(os.str());
  }
  Matrix value = a.value() * b.value();
  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  const Var ops[] = {a, b};
  return t.record(std::move(value), ops, [ai, bi](const Tape& tape, const Matrix& g, std::span<Matrix* const> adj) {
    if (adj[0]) adj[0]->noalias() += g * tape.value(bi).transpose();
    if (adj[1]) adj[1]->noalias() += tape.value(ai).transpose() * g;
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  if (x.tape() != w.tape() || x.tape() != b.tape()) throw UsageError("affine: operands on different tapes");
  Tape& t = tape_of(x);
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    std::ostringstream os;
    os << "affine: shapes " << x.rows() << "x" << x.cols() << ", " << w.rows() << "x" << w.cols() << ", "
       << b.rows() << "x" << b.cols() << " do not compose";
    throw UsageError(os.str());
  }
  Matrix value = x.value() * w.value();
  value.rowwise() += b.value().row(0);
  const std::size_t xi = x.id();
  const std::size_t wi = w.id();
  const Var ops[] = {x, w, b};
  return t.record(std::move(value), ops, [xi, wi](const Tape& tape, const Matrix& g, std::span<Matrix* const> adj) {
    if (adj[0]) adj[0]->noalias() += g * tape.value(wi).transpose();
    if (adj[1]) adj[1]->noalias() += tape.value(xi).transpose() * g;
    if (adj[2]) *adj[2] += g.colwise().sum();
  });
}

Var sum(const Var& x) {
  Tape& t = tape_of(x);
  const Var ops[] = {x};
  return t.record(Matrix::Constant(1, 1, x.value().sum()), ops,
                  [](const Tape&, const Matrix& g, std::span<Matrix* const> adj) {
                    adj[0]->array() += g(0, 0);
                  });
}

Var row_sum(const Var& x) {
  Tape& t = tape_of(x);
  const Var ops[] = {x};
  return t.record(x.value().rowwise().sum(), ops, [](const Tape&, const Matrix& g, std::span<Matrix* const> adj) {
    adj[0]->colwise() += g.col(0);
  });
}

Var cols(const Var& x, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(x);
  if (start < 0 || count < 0 || start + count > x.cols()) throw UsageError("cols: column range out of bounds");
  const Var ops[] = {x};
  return t.record(x.value().middleCols(start, count), ops,
                  [start, count](const Tape&, const Matrix& g, std::span<Matrix* const> adj) {
                    adj[0]->middleCols(start, count) += g;
                  });
}

Var col(const Var& x, Eigen::Index j) { return cols(x, j, 1); }

Var hcat(std::span<const Var> blocks) {
  if (blocks.empty()) throw UsageError("hcat: no blocks");
  // Built pairwise so each record call stays within the three-operand limit.
  Var acc = blocks[0];
  for (std::size_t k = 1; k < blocks.size(); ++k) {
    const Var& next = blocks[k];
    Tape& t = tape_of(acc, next);
    if (next.rows() != acc.rows()) throw UsageError("hcat: blocks differ in height");
    Matrix value(acc.rows(), acc.cols() + next.cols());
    value << acc.value(), next.value();
    const Eigen::Index left = acc.cols();
    const Eigen::Index right = next.cols();
    const Var ops[] = {acc, next};
    acc = t.record(std::move(value), ops, [left, right](const Tape&, const Matrix& g, std::span<Matrix* const> adj) {
      if (adj[0]) *adj[0] += g.leftCols(left);
      if (adj[1]) *adj[1] += g.rightCols(right);
    });
  }
  return acc;
}

Var reshape(const Var& flat, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of(flat);
  if (flat.cols() != 1 || offset < 0 || offset + rows * cols > flat.rows())
    throw UsageError("reshape: range exceeds the flat parameter vector");
  Matrix value = Eigen::Map<const Matrix>(flat.value().data() + offset, rows, cols);
  const Var ops[] = {flat};
  return t.record(std::move(value), ops,
                  [offset, rows, cols](const Tape&, const Matrix& g, std::span<Matrix* const> adj) {
                    Eigen::Map<Matrix>(adj[0]->data() + offset, rows, cols) += g;
                  });
}

// Dispatch --------------------------------------------------------------------

std::string_view op_name(OpKind kind) {
  static constexpr std::string_view names[] = {"add", "sub", "mul",     "div",  "neg",        "exp", "log",   "sin",
                                               "cos", "pow", "sigmoid", "relu", "leaky-relu", "dot", "affine"};
  return names[static_cast<int>(kind)];
}

std::size_t op_arity(OpKind kind) {
  switch (kind) {
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul:
    case OpKind::div:
    case OpKind::pow:
    case OpKind::dot:
      return 2;
    case OpKind::affine:
      return 3;
    default:
      return 1;
  }
}

Var apply_elementary(OpKind kind, std::span<const Var> operands) {
  if (operands.size() != op_arity(kind)) {
    std::ostringstream os;
    os << op_name(kind) << ": expected " << op_arity(kind) << " operands, got " << operands.size();
    throw UsageError(os.str());
  }
  switch (kind) {
    case OpKind::add: return operands[0] + operands[1];
    case OpKind::sub: return operands[0] - operands[1];
    case OpKind::mul: return operands[0] * operands[1];
    case OpKind::div: return operands[0] / operands[1];
    case OpKind::neg: return -operands[0];
    case OpKind::exp: return exp(operands[0]);
    case OpKind::log: return log(operands[0]);
    case OpKind::sin: return sin(operands[0]);
    case OpKind::cos: return cos(operands[0]);
    case OpKind::pow: return pow(operands[0], operands[1]);
    case OpKind::sigmoid: return sigmoid(operands[0]);
    case OpKind::relu: return relu(operands[0]);
    case OpKind::leaky_relu: return leaky_relu(operands[0]);
    case OpKind::dot: return dot(operands[0], operands[1]);
    case OpKind::affine: return affine(operands[0], operands[1], operands[2]);
  }
  throw UsageError("apply_elementary: unknown op");
}

// Gradient checks -------------------------------------------------------------

namespace {

Scalar evaluate(const std::function<Var(const Var&)>& f, const Vector& point) {
  Tape tape;
  const Var x = tape.constant(Matrix(point));
  return f(x).scalar();
}

}  // namespace

Scalar finite_diff_check(const std::function<Var(const Var&)>& f, const Vector& point, Scalar h) {
  Tape tape;
  const Var x = tape.leaf(Matrix(point));
  const Var y = f(x);
  const Vector analytic = tape.backward(y)[x].col(0);

  Scalar worst = 0.0;
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + h;
    const Scalar up = evaluate(f, probe);
    probe(i) = point(i) - h;
    const Scalar down = evaluate(f, probe);
    probe(i) = point(i);
    const Scalar numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic(i) - numeric) / (std::abs(analytic(i)) + 1e-12));
  }
  return worst;
}

Scalar directional_diff_check(const std::function<Var(const Var&)>& f, const Vector& point, const Vector& direction,
                              Scalar h) {
  Tape tape;
  const Var x = tape.leaf(Matrix(point));
  const Var y = f(x);
  const Scalar analytic = tape.backward(y)[x].col(0).dot(direction);
  const Scalar up = evaluate(f, point + h * direction);
  const Scalar down = evaluate(f, point - h * direction);
  const Scalar numeric = (up - down) / (2.0 * h);
  return std::abs(analytic - numeric) / (std::abs(analytic) + 1e-12);
}

}  // namespace lps
