#include "fcnlp/lpn.hpp"

#include <string>

#include "fcnlp/error.hpp"
#include "fcnlp/fcn.hpp"

namespace fcnlp {

LpnModel make_lpn(const LpnConfig& cfg, std::mt19937_64& rng) {
  if (cfg.feature_dim == 0) fail(Errc::BadConfig, "LPN feature dim must be positive");
  if (cfg.num_layers == 0) fail(Errc::BadConfig, "LPN needs at least one layer");
  const Index d = static_cast<Index>(cfg.feature_dim);
  const Index heads = cfg.kind == AttentionKind::Signed ? 2 : 1;
  LpnModel m;
  m.config = cfg;
  m.v = Parameter("lpn.v", glorot_uniform(d, d, rng));
  // A starts at zero so every alpha is tanh(0) = 0 (or sigmoid(0) = 1/2):
  // on dense graphs random attention summed over many neighbours would
  // saturate the softmax before training starts.
  m.a = Parameter("lpn.a", Matrix::Zero(heads, 2 * d));
  return m;
}

EdgeAttention compute_alpha(Tape& tape, LpnModel& model, const Var& xl, const GraphIndex& g) {
  const Index d = static_cast<Index>(model.config.feature_dim);
  if (static_cast<std::size_t>(xl.rows()) != g.n || xl.cols() != d) {
    fail(Errc::ShapeMismatch, "compute_alpha: features " + std::to_string(xl.rows()) + "x" +
                                  std::to_string(xl.cols()) + " for " + std::to_string(g.n) +
                                  " nodes of dim " + std::to_string(d));
  }
  // A [Vx_i, Vx_j] = A_left V x_i + A_right V x_j, so the per-node halves are
  // computed once and gathered per edge. Row-vector form: z = x V^T.
  const Var a = tape.param(model.a);
  const Var z = matmul(xl, transpose(tape.param(model.v)));
  const Var left = matmul(z, transpose(slice_cols(a, 0, d)));
  const Var right = matmul(z, transpose(slice_cols(a, d, d)));
  const Var pre = add(gather_rows(left, g.src), gather_rows(right, g.dst));
  if (model.config.kind == AttentionKind::Signed) return {tanh_op(pre)};
  return {broadcast_cols(sigmoid(pre), 2)};
}

Var propagate_once(const Var& y, const EdgeAttention& att, const GraphIndex& g) {
  if (static_cast<std::size_t>(y.rows()) != g.n || y.cols() != 2) {
    fail(Errc::ShapeMismatch, "propagate: labels must be " + std::to_string(g.n) + "x2");
  }
  if (static_cast<std::size_t>(att.alpha.rows()) != g.src.size() || att.alpha.cols() != 2) {
    fail(Errc::ShapeMismatch, "propagate: attention does not match the edge list");
  }
  const Var messages = hadamard(att.alpha, gather_rows(y, g.dst));
  const Var incoming = scatter_add_rows(messages, g.src, static_cast<Index>(g.n));
  return row_softmax(add(y, incoming));
}

Var propagate(Tape& tape, LpnModel& model, const Var& y1, const Var& xl, const GraphIndex& g) {
  if (model.config.num_layers <= 1) return y1;
  const EdgeAttention att = compute_alpha(tape, model, xl, g);
  Var y = y1;
  for (std::size_t l = 1; l < model.config.num_layers; ++l) y = propagate_once(y, att, g);
  return y;
}

}  // namespace fcnlp
