#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fcnlp/tensor.hpp"

namespace fcnlp {

struct GradcheckOptions {
  double step = 1e-5;       // central-difference step h
  double tolerance = 1e-4;  // bound on the relative error
  // Relative error is |a - n| / max(|a|, |n|, floor): the floor keeps
  // entries whose true gradient is ~0 from dividing rounding noise by ~0.
  double floor = 1e-6;
};

// Largest relative error between the tape's gradient of forward() (a 1x1
// Var) with respect to every element of `params` and the central finite
// difference (f(x + h) - f(x - h)) / 2h. forward must build a fresh graph
// on the tape it is given and read the parameters through Tape::param.
double max_relative_error(std::span<Parameter* const> params, const std::function<Var(Tape&)>& forward,
                          const GradcheckOptions& opts = {});

struct GradcheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;
  std::size_t seeds = 0;

  bool ok() const;
};

// Checks every differentiable op, each model block, and the combined
// training loss l_fcn + lambda l_lpn + mu l_mmd on a 5-node instance, for
// `seeds` random instances starting at `first_seed`.
GradcheckReport run_gradcheck(std::uint64_t first_seed = 0, std::size_t seeds = 5, const GradcheckOptions& opts = {});

std::string format_report(const GradcheckReport& report);

}  // namespace fcnlp
