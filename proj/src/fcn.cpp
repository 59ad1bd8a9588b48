#include "fcnlp/fcn.hpp"

#include <cmath>
#include <string>

#include "fcnlp/error.hpp"

namespace fcnlp {

Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(fan_in, fan_out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

std::size_t FcnModel::output_dim() const {
  return layers.empty() ? config.input_dim : config.hidden;
}

std::vector<Parameter*> FcnModel::parameters() {
  std::vector<Parameter*> out;
  for (GcnLayer& l : layers) {
    if (!l.shared_self) out.push_back(&l.w_self);
    out.push_back(&l.w_nbr);
  }
  for (Parameter* p : {&head.w1, &head.b1, &head.w2, &head.b2}) out.push_back(p);
  return out;
}

FcnModel make_fcn(const FcnConfig& cfg, std::mt19937_64& rng) {
  if (cfg.input_dim == 0 || cfg.hidden == 0) fail(Errc::BadConfig, "FCN dims must be positive");
  FcnModel m;
  m.config = cfg;
  Index in = static_cast<Index>(cfg.input_dim);
  const Index h = static_cast<Index>(cfg.hidden);
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    GcnLayer layer;
    layer.shared_self = cfg.shared_self_weight;
    const std::string tag = "gcn" + std::to_string(l);
    if (!cfg.shared_self_weight) layer.w_self = Parameter(tag + ".w_self", glorot_uniform(in, h, rng));
    layer.w_nbr = Parameter(tag + ".w_nbr", glorot_uniform(in, h, rng));
    m.layers.push_back(std::move(layer));
    in = h;
  }
  const Index mid = std::max<Index>(1, h / 2);
  m.head.w1 = Parameter("head.w1", glorot_uniform(in, mid, rng));
  m.head.b1 = Parameter("head.b1", Matrix::Zero(1, mid));
  m.head.w2 = Parameter("head.w2", glorot_uniform(mid, 2, rng));
  m.head.b2 = Parameter("head.b2", Matrix::Zero(1, 2));
  return m;
}

Var gcn_layer_forward(Tape& tape, GcnLayer& layer, const Var& x, const GraphIndex& g) {
  if (static_cast<std::size_t>(x.rows()) != g.n) {
    fail(Errc::ShapeMismatch, "gcn layer: " + std::to_string(x.rows()) + " feature rows for " +
                                  std::to_string(g.n) + " nodes");
  }
  const Var self_term = matmul(x, tape.param(layer.self_weight()));
  const Var nbr = neighbor_aggregate(matmul(x, tape.param(layer.w_nbr)), g.gcn);
  return relu(add(self_term, nbr));
}

Var contextualize(Tape& tape, FcnModel& model, const Var& x, const GraphIndex& g) {
  Var h = x;
  for (GcnLayer& layer : model.layers) h = gcn_layer_forward(tape, layer, h, g);
  return h;
}

Var predict_initial(Tape& tape, FcnModel& model, const Var& xl) {
  MlpHead& hd = model.head;
  const Var hidden = relu(add_bias(matmul(xl, tape.param(hd.w1)), tape.param(hd.b1)));
  const Var logits = add_bias(matmul(hidden, tape.param(hd.w2)), tape.param(hd.b2));
  return row_softmax(logits);
}

}  // namespace fcnlp
