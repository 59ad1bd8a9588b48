#include "fcnlp/optim.hpp"

#include <cmath>

#include "fcnlp/error.hpp"

namespace fcnlp {

void adamw_step(std::span<Parameter* const> params, AdamWState& state, const AdamWConfig& cfg, double lr) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) fail(Errc::ShapeMismatch, "optimizer state/parameter count differ");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
        state.m[k].rows() != p.value.rows() || state.m[k].cols() != p.value.cols()) {
      fail(Errc::ShapeMismatch, "AdamW: shape mismatch on parameter " + p.name);
    }
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    const auto g = p.grad.array();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    p.value.array() -= lr * ((m / bc1) / ((v / bc2).sqrt() + cfg.eps) + cfg.weight_decay * p.value.array());
  }
}

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg, double lr)
    : params_(std::move(params)), cfg_(cfg), lr_(lr) {}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void AdamW::step() { adamw_step(params_, state_, cfg_, lr_); }

}  // namespace fcnlp
