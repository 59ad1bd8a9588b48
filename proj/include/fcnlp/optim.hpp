#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcnlp/tensor.hpp"

namespace fcnlp {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;
};

// theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
void adamw_step(std::span<Parameter* const> params, AdamWState& state, const AdamWConfig& cfg, double lr);

class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWConfig cfg, double lr);

  void zero_grad();
  void step();
  std::size_t steps() const { return state_.step; }

 private:
  std::vector<Parameter*> params_;
  AdamWConfig cfg_;
  double lr_;
  AdamWState state_;
};

}  // namespace fcnlp
