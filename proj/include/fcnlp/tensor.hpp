#pragma once

// Dense 2-D tensors with a reverse-mode autodiff tape.
//
// A Tape owns every intermediate produced during one forward pass. Ops are
// free functions taking Var handles; each records its value and a closure
// that pushes the upstream gradient into its inputs. Parameters live
// outside the tape and receive accumulated gradients when backward() runs.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fcnlp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string name, Matrix value);

  void zero_grad();
};

class Tape;

// Lightweight handle to a node on a Tape. Copyable; does not own data.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Gradient after Tape::backward. Empty matrix if nothing flowed here.
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(const Matrix& out_grad, const Matrix& out_value)>;

  // In checked mode every op output is scanned for NaN/Inf.
  explicit Tape(bool checked = true) : checked_(checked) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var leaf(Matrix value);
  Var param(Parameter& p);

  // Records an op output. `fn` runs during backward only if some input
  // requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);

  // Gradient buffer of `v`, zero-initialised on first use; nullptr when
  // `v` does not require a gradient.
  Matrix* grad_slot(const Var& v);

  void backward(const Var& loss);

  void require_same_tape(const Var& v) const;

  bool checked() const { return checked_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Node& node(const Var& v);
  const Node& node(const Var& v) const;

  std::deque<Node> nodes_;
  bool checked_;
  bool consumed_ = false;
};

// Row-compressed constant weights used for neighbour aggregation:
// out[i] = sum_k weights[k] * in[cols[k]] for k in [offsets[i], offsets[i+1]).
struct SparseRows {
  std::size_t rows = 0;
  std::size_t in_rows = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> weights;
};

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, Index start, Index count);
Var transpose(const Var& a);
// a [m x n] + bias [1 x n] broadcast over rows.
Var add_bias(const Var& a, const Var& bias);

Var relu(const Var& a);
Var tanh_op(const Var& a);
Var sigmoid(const Var& a);
Var row_softmax(const Var& a);

Var gather_rows(const Var& a, std::span<const std::uint32_t> index);
Var scatter_add_rows(const Var& a, std::span<const std::uint32_t> index, Index out_rows);
// `weights` is referenced by the backward closure and must outlive the tape.
Var neighbor_aggregate(const Var& a, const SparseRows& weights);
// [m x 1] -> [m x n], copying the column.
Var broadcast_cols(const Var& a, Index n);

Var mean_rows(const Var& a);
Var sum(const Var& a);
// log(max(a, eps)); the gradient is zero where the clamp is active.
Var log_clamped(const Var& a, double eps);
// Gathers a[rows[k], cols[k]] into a [k x 1] column.
Var pick(const Var& a, std::span<const std::uint32_t> rows, std::span<const std::uint32_t> cols);

// Plain row-wise softmax on values, shared with oracles and inference.
Matrix row_softmax_values(const Matrix& logits);

}  // namespace fcnlp
