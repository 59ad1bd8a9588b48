#include "fcnlp/losses.hpp"

#include <string>

#include "fcnlp/error.hpp"

namespace fcnlp {

Var cross_entropy(const Var& probs, std::span<const Target> targets, Reduction reduction,
                  LabelReadCounter* counter) {
  if (probs.cols() != 2) fail(Errc::ShapeMismatch, "cross-entropy expects two class columns");
  std::vector<std::uint32_t> rows, cols;
  rows.reserve(targets.size());
  cols.reserve(targets.size());
  for (const Target& t : targets) {
    if (t.label == Label::Unlabeled) {
      fail(Errc::MissingLabel, "supervised row " + std::to_string(t.row) + " has no label");
    }
    if (counter != nullptr) {
      switch (t.split) {
        case Split::Seen: ++counter->seen; break;
        case Split::Unseen: ++counter->unseen; break;
        case Split::Test: ++counter->test; break;
      }
    }
    rows.push_back(t.row);
    cols.push_back(t.label == Label::Fake ? 1u : 0u);
  }
  Tape& tape = *probs.tape();
  if (targets.empty()) return tape.constant(Matrix::Zero(1, 1));
  const Var nll = scale(sum(log_clamped(pick(probs, rows, cols), kProbClamp)), -1.0);
  if (reduction == Reduction::Mean) return scale(nll, 1.0 / static_cast<double>(targets.size()));
  return nll;
}

double mmd(const Matrix& p, const Matrix& q) {
  if (p.rows() == 0 || q.rows() == 0) fail(Errc::EmptySet, "MMD needs two nonempty sets");
  if (p.cols() != q.cols()) fail(Errc::ShapeMismatch, "MMD sets differ in dimension");
  const Eigen::RowVectorXd diff = p.colwise().mean() - q.colwise().mean();
  return diff.squaredNorm();
}

Var mmd(const Var& p, const Var& q) {
  if (p.rows() == 0 || q.rows() == 0) fail(Errc::EmptySet, "MMD needs two nonempty sets");
  const Var diff = sub(mean_rows(p), mean_rows(q));
  return sum(hadamard(diff, diff));
}

DomainGroups domain_groups(std::span<const Label> labels, std::span<const Split> splits) {
  if (labels.size() != splits.size()) fail(Errc::ShapeMismatch, "labels and splits differ in length");
  DomainGroups g;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<std::uint32_t>(i);
    if (labels[i] == Label::Unlabeled) continue;
    const bool fake = labels[i] == Label::Fake;
    if (splits[i] == Split::Seen) (fake ? g.seen_fake : g.seen_real).push_back(row);
    if (splits[i] == Split::Unseen) (fake ? g.unseen_fake : g.unseen_real).push_back(row);
  }
  return g;
}

Var mmd_loss(Tape& tape, const Var& xl, const DomainGroups& groups) {
  Var total = tape.constant(Matrix::Zero(1, 1));
  const auto term = [&](const std::vector<std::uint32_t>& s, const std::vector<std::uint32_t>& u,
                        const char* cls) {
    if (s.empty() || u.empty()) {
      warn(std::string("MMD: ") + cls + " class is empty in the " + (s.empty() ? "seen" : "unseen") +
           " subset; its term is 0");
      return;
    }
    total = add(total, mmd(gather_rows(xl, s), gather_rows(xl, u)));
  };
  term(groups.seen_real, groups.unseen_real, "real");
  term(groups.seen_fake, groups.unseen_fake, "fake");
  return total;
}

double total_loss(const LossValues& parts, double lambda, double mu) {
  return parts.l_fcn + lambda * parts.l_lpn + mu * parts.l_mmd;
}

Var total_loss(const Var& l_fcn, const Var& l_lpn, const Var& l_mmd, double lambda, double mu) {
  return add(add(l_fcn, scale(l_lpn, lambda)), scale(l_mmd, mu));
}

}  // namespace fcnlp
