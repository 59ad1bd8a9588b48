#pragma once

// Feature contextualization network: a stack of GCN layers followed by a
// two-layer MLP head producing per-node (p_real, p_fake).

#include <cstddef>
#include <random>
#include <vector>

#include "fcnlp/graph.hpp"
#include "fcnlp/tensor.hpp"

namespace fcnlp {

struct FcnConfig {
  std::size_t input_dim = 0;
  std::size_t hidden = 256;
  std::size_t gcn_layers = 4;
  // Use one matrix for both the self and the neighbour term.
  bool shared_self_weight = false;
};

struct GcnLayer {
  Parameter w_self;  // unused when shared
  Parameter w_nbr;
  bool shared_self = false;

  const Parameter& self_weight() const { return shared_self ? w_nbr : w_self; }
  Parameter& self_weight() { return shared_self ? w_nbr : w_self; }
};

struct MlpHead {
  Parameter w1, b1, w2, b2;
};

struct FcnModel {
  FcnConfig config;
  std::vector<GcnLayer> layers;
  MlpHead head;

  std::size_t output_dim() const;
  std::vector<Parameter*> parameters();
};

// Glorot-uniform weights, zero biases.
Matrix glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng);

FcnModel make_fcn(const FcnConfig& cfg, std::mt19937_64& rng);

// Row i = ReLU(x_i W_self + sum_{j in N(i)} x_j W_nbr / sqrt(|N_i||N_j|)).
Var gcn_layer_forward(Tape& tape, GcnLayer& layer, const Var& x, const GraphIndex& g);

// Applies every GCN layer in order; returns x unchanged for zero layers.
Var contextualize(Tape& tape, FcnModel& model, const Var& x, const GraphIndex& g);

// row_softmax(MLP(xl)).
Var predict_initial(Tape& tape, FcnModel& model, const Var& xl);

}  // namespace fcnlp
