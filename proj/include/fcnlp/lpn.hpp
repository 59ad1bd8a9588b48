#pragma once

// Label propagation network. Per directed edge (i, j) an attention pair
// alpha_ij = tanh(A [V x_i, V x_j]) in [-1, 1]^2 weighs how neighbour j's
// class probabilities push node i's; each layer is
//   y_i <- softmax(y_i + sum_j alpha_ij * y_j).

#include <cstddef>
#include <random>
#include <vector>

#include "fcnlp/graph.hpp"
#include "fcnlp/tensor.hpp"

namespace fcnlp {

enum class AttentionKind {
  Signed,  // tanh, one weight per class
  Scalar,  // sigmoid, one weight in [0, 1] shared by both classes
};

struct LpnConfig {
  std::size_t feature_dim = 0;
  std::size_t num_layers = 2;
  AttentionKind kind = AttentionKind::Signed;
};

struct LpnModel {
  LpnConfig config;
  Parameter a;  // [2 x 2d] signed, [1 x 2d] scalar
  Parameter v;  // [d x d]

  std::vector<Parameter*> parameters() { return {&a, &v}; }
};

LpnModel make_lpn(const LpnConfig& cfg, std::mt19937_64& rng);

struct EdgeAttention {
  // [E x 2], row k belongs to directed edge (GraphIndex::src[k], dst[k]).
  Var alpha;
};

EdgeAttention compute_alpha(Tape& tape, LpnModel& model, const Var& xl, const GraphIndex& g);

Var propagate_once(const Var& y, const EdgeAttention& att, const GraphIndex& g);

// Runs num_layers - 1 propagation steps from y1 with one shared attention.
Var propagate(Tape& tape, LpnModel& model, const Var& y1, const Var& xl, const GraphIndex& g);

}  // namespace fcnlp
