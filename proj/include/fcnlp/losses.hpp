#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fcnlp/dataset.hpp"
#include "fcnlp/tensor.hpp"

namespace fcnlp {

inline constexpr double kProbClamp = 1e-12;

struct LossValues {
  double l_fcn = 0.0;
  double l_lpn = 0.0;
  double l_mmd = 0.0;
  double l_all = 0.0;
};

// A supervised node: its row in the probability tensor and its record.
struct Target {
  std::uint32_t row = 0;
  Label label = Label::Real;
  Split split = Split::Seen;
};

// Instrumentation: how many labels of each split the cross-entropy terms read.
struct LabelReadCounter {
  std::uint64_t seen = 0;
  std::uint64_t unseen = 0;
  std::uint64_t test = 0;
};

enum class Reduction { Sum, Mean };

// -sum_i log p_i[label_i] over `targets`, probabilities clamped at 1e-12.
// Throws MissingLabel for an unlabeled target.
Var cross_entropy(const Var& probs, std::span<const Target> targets, Reduction reduction,
                  LabelReadCounter* counter = nullptr);

inline Var ce_fcn(const Var& y_tilde, std::span<const Target> targets, Reduction r,
                  LabelReadCounter* counter = nullptr) {
  return cross_entropy(y_tilde, targets, r, counter);
}

inline Var ce_lpn(const Var& y_hat, std::span<const Target> targets, Reduction r,
                  LabelReadCounter* counter = nullptr) {
  return cross_entropy(y_hat, targets, r, counter);
}

// Squared distance between the row means of p and q. Throws EmptySet.
double mmd(const Matrix& p, const Matrix& q);
Var mmd(const Var& p, const Var& q);

// Row groups of the feature matrix feeding the class-conditional MMD.
struct DomainGroups {
  std::vector<std::uint32_t> seen_real, seen_fake, unseen_real, unseen_fake;
};

DomainGroups domain_groups(std::span<const Label> labels, std::span<const Split> splits);

// MMD(seen real, unseen real) + MMD(seen fake, unseen fake). A class empty
// on either side contributes 0 and a warning.
Var mmd_loss(Tape& tape, const Var& xl, const DomainGroups& groups);

double total_loss(const LossValues& parts, double lambda, double mu);
Var total_loss(const Var& l_fcn, const Var& l_lpn, const Var& l_mmd, double lambda, double mu);

}  // namespace fcnlp
