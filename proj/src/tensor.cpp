#include "fcnlp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "fcnlp/error.hpp"

namespace fcnlp {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) fail(Errc::ShapeMismatch, std::string(op) + ": " + shape(a) + " vs " + shape(b));
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) fail(Errc::DetachedNode, "op input is not attached to a tape");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  t.require_same_tape(b);
  return t;
}

std::vector<std::uint32_t> copy_index(std::span<const std::uint32_t> index, Index bound,
                                      const char* op) {
  for (auto i : index) {
    if (static_cast<Index>(i) >= bound) {
      fail(Errc::IndexOutOfRange, std::string(op) + ": row " + std::to_string(i) +
                                      " out of " + std::to_string(bound));
    }
  }
  return {index.begin(), index.end()};
}

}  // namespace

Parameter::Parameter(std::string name, Matrix value)
    : name(std::move(name)), value(std::move(value)) {
  zero_grad();
}

void Parameter::zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }

const Matrix& Var::value() const { return tape_->node(*this).value; }
const Matrix& Var::grad() const { return tape_->node(*this).grad; }
bool Var::requires_grad() const { return tape_->node(*this).requires_grad; }

Tape::Node& Tape::node(const Var& v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) fail(Errc::DetachedNode, "node not on this tape");
  return nodes_[v.id_];
}

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) fail(Errc::DetachedNode, "node not on this tape");
  return nodes_[v.id_];
}

void Tape::require_same_tape(const Var& v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    fail(Errc::DetachedNode, "op inputs live on different tapes");
  }
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, true, &p, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  bool needs_grad = false;
  for (const auto& in : inputs) {
    require_same_tape(in);
    needs_grad = needs_grad || nodes_[in.id_].requires_grad;
  }
  if (checked_ && !value.allFinite()) {
    fail(Errc::NonFiniteValue, "op produced a non-finite value");
  }
  nodes_.push_back(Node{std::move(value), {}, needs_grad, nullptr,
                        needs_grad ? std::move(fn) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Matrix* Tape::grad_slot(const Var& v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return &n.grad;
}

void Tape::backward(const Var& loss) {
  Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    fail(Errc::NotScalar, "backward needs a 1x1 loss, got " + shape(root.value));
  }
  if (consumed_) fail(Errc::DetachedNode, "backward already ran on this tape");
  consumed_ = true;
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);

  for (std::size_t k = loss.id_ + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(n.grad, n.value);
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->zero_grad();
      }
      n.param->grad += n.grad;
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_shape(a.cols() == b.rows(), "matmul", a.value(), b.value());
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) ga->noalias() += g * b.value().transpose();
    if (Matrix* gb = t.grad_slot(b)) gb->noalias() += a.value().transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.value(), b.value());
  return t.record(a.value() + b.value(), {a, b}, [&t, a, b](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) *ga += g;
    if (Matrix* gb = t.grad_slot(b)) *gb += g;
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.value(), b.value());
  return t.record(a.value() - b.value(), {a, b}, [&t, a, b](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) *ga += g;
    if (Matrix* gb = t.grad_slot(b)) *gb -= g;
  });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard", a.value(), b.value());
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) *ga += g.cwiseProduct(b.value());
    if (Matrix* gb = t.grad_slot(b)) *gb += g.cwiseProduct(a.value());
  });
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a}, [&t, a, s](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) *ga += g * s;
  });
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_shape(a.rows() == b.rows(), "concat_cols", a.value(), b.value());
  const Index p = a.cols();
  const Index q = b.cols();
  Matrix out(a.rows(), p + q);
  out.leftCols(p) = a.value();
  out.rightCols(q) = b.value();
  return t.record(std::move(out), {a, b}, [&t, a, b, p, q](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) *ga += g.leftCols(p);
    if (Matrix* gb = t.grad_slot(b)) *gb += g.rightCols(q);
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.cols()) {
    fail(Errc::ShapeMismatch, "slice_cols: [" + std::to_string(start) + ", +" +
                                  std::to_string(count) + ") outside " + shape(a.value()));
  }
  Matrix out = a.value().middleCols(start, count);
  return t.record(std::move(out), {a}, [&t, a, start, count](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) ga->middleCols(start, count) += g;
  });
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().transpose();
  return t.record(std::move(out), {a}, [&t, a](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) *ga += g.transpose();
  });
}

Var add_bias(const Var& a, const Var& bias) {
  Tape& t = tape_of(a, bias);
  require_shape(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias", a.value(), bias.value());
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return t.record(std::move(out), {a, bias}, [&t, a, bias](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) *ga += g;
    if (Matrix* gb = t.grad_slot(bias)) *gb += g.colwise().sum();
  });
}

Var relu(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().cwiseMax(0.0);
  return t.record(std::move(out), {a}, [&t, a](const Matrix& g, const Matrix& y) {
    if (Matrix* ga = t.grad_slot(a)) *ga += (y.array() > 0.0).select(g, 0.0);
  });
}

Var tanh_op(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().tanh().matrix();
  return t.record(std::move(out), {a}, [&t, a](const Matrix& g, const Matrix& y) {
    if (Matrix* ga = t.grad_slot(a)) *ga += (g.array() * (1.0 - y.array().square())).matrix();
  });
}

Var sigmoid(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([](double x) {
    // Branches keep exp() from overflowing for large |x|.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return t.record(std::move(out), {a}, [&t, a](const Matrix& g, const Matrix& y) {
    if (Matrix* ga = t.grad_slot(a)) *ga += (g.array() * y.array() * (1.0 - y.array())).matrix();
  });
}

Matrix row_softmax_values(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Var row_softmax(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out = a.cols() > 0 ? row_softmax_values(a.value()) : a.value();
  return t.record(std::move(out), {a}, [&t, a](const Matrix& g, const Matrix& y) {
    Matrix* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    // y * (g - <g, y>) per row.
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    *ga += (y.array() * (g.colwise() - dots).array()).matrix();
  });
}

Var gather_rows(const Var& a, std::span<const std::uint32_t> index) {
  Tape& t = tape_of(a);
  auto idx = copy_index(index, a.rows(), "gather_rows");
  const Index c = a.cols();
  Matrix out(static_cast<Index>(idx.size()), c);
  const double* src = a.value().data();
  double* dst = out.data();
  for (std::size_t k = 0; k < idx.size(); ++k) std::copy_n(src + idx[k] * c, c, dst + static_cast<Index>(k) * c);
  return t.record(std::move(out), {a}, [&t, a, c, idx = std::move(idx)](const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    double* out_grad = ga->data();
    const double* in_grad = g.data();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double* row = out_grad + idx[k] * c;
      const double* from = in_grad + static_cast<Index>(k) * c;
      for (Index j = 0; j < c; ++j) row[j] += from[j];
    }
  });
}

Var scatter_add_rows(const Var& a, std::span<const std::uint32_t> index, Index out_rows) {
  Tape& t = tape_of(a);
  if (static_cast<Index>(index.size()) != a.rows()) {
    fail(Errc::ShapeMismatch, "scatter_add_rows: " + std::to_string(index.size()) +
                                  " indices for " + shape(a.value()));
  }
  auto idx = copy_index(index, out_rows, "scatter_add_rows");
  const Index c = a.cols();
  Matrix out = Matrix::Zero(out_rows, c);
  const double* src = a.value().data();
  double* dst = out.data();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    double* row = dst + idx[k] * c;
    const double* from = src + static_cast<Index>(k) * c;
    for (Index j = 0; j < c; ++j) row[j] += from[j];
  }
  return t.record(std::move(out), {a}, [&t, a, c, idx = std::move(idx)](const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    double* out_grad = ga->data();
    const double* in_grad = g.data();
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double* row = out_grad + static_cast<Index>(k) * c;
      const double* from = in_grad + idx[k] * c;
      for (Index j = 0; j < c; ++j) row[j] += from[j];
    }
  });
}

Var neighbor_aggregate(const Var& a, const SparseRows& w) {
  Tape& t = tape_of(a);
  if (static_cast<Index>(w.in_rows) != a.rows() || w.offsets.size() != w.rows + 1) {
    fail(Errc::ShapeMismatch, "neighbor_aggregate: operator expects " + std::to_string(w.in_rows) +
                                  " input rows, got " + shape(a.value()));
  }
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(static_cast<Index>(w.rows), x.cols());
  for (std::size_t i = 0; i < w.rows; ++i) {
    for (std::size_t k = w.offsets[i]; k < w.offsets[i + 1]; ++k) {
      out.row(static_cast<Index>(i)) += w.weights[k] * x.row(w.cols[k]);
    }
  }
  return t.record(std::move(out), {a}, [&t, a, &w](const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    for (std::size_t i = 0; i < w.rows; ++i) {
      for (std::size_t k = w.offsets[i]; k < w.offsets[i + 1]; ++k) {
        ga->row(w.cols[k]) += w.weights[k] * g.row(static_cast<Index>(i));
      }
    }
  });
}

Var broadcast_cols(const Var& a, Index n) {
  Tape& t = tape_of(a);
  if (a.cols() != 1) fail(Errc::ShapeMismatch, "broadcast_cols needs one column, got " + shape(a.value()));
  Matrix out = a.value().replicate(1, n);
  return t.record(std::move(out), {a}, [&t, a](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) *ga += g.rowwise().sum();
  });
}

Var mean_rows(const Var& a) {
  Tape& t = tape_of(a);
  if (a.rows() == 0) fail(Errc::EmptySet, "mean_rows of an empty tensor");
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return t.record(std::move(out), {a}, [&t, a, inv](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) ga->rowwise() += g.row(0) * inv;
  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [&t, a](const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_slot(a)) ga->array() += g(0, 0);
  });
}

Var log_clamped(const Var& a, double eps) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([eps](double x) { return std::log(std::max(x, eps)); });
  return t.record(std::move(out), {a}, [&t, a, eps](const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_slot(a);
    if (ga == nullptr) return;
    const Matrix& x = a.value();
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index j = 0; j < x.cols(); ++j) {
        if (x(i, j) > eps) (*ga)(i, j) += g(i, j) / x(i, j);
      }
    }
  });
}

Var pick(const Var& a, std::span<const std::uint32_t> rows, std::span<const std::uint32_t> cols) {
  Tape& t = tape_of(a);
  if (rows.size() != cols.size()) {
    fail(Errc::ShapeMismatch, "pick: row and column index lists differ in length");
  }
  auto r = copy_index(rows, a.rows(), "pick");
  auto c = copy_index(cols, a.cols(), "pick");
  Matrix out(static_cast<Index>(r.size()), 1);
  for (std::size_t k = 0; k < r.size(); ++k) out(static_cast<Index>(k), 0) = a.value()(r[k], c[k]);
  return t.record(std::move(out), {a},
                  [&t, a, r = std::move(r), c = std::move(c)](const Matrix& g, const Matrix&) {
                    Matrix* ga = t.grad_slot(a);
                    if (ga == nullptr) return;
                    for (std::size_t k = 0; k < r.size(); ++k) (*ga)(r[k], c[k]) += g(static_cast<Index>(k), 0);
                  });
}

}  // namespace fcnlp
