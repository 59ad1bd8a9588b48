#include "fcnlp/trainer.hpp"

#include <cmath>
#include <random>

#include "fcnlp/error.hpp"

namespace fcnlp {

namespace {

constexpr std::uint64_t kLpnSeedSalt = 0x9E3779B97F4A7C15ull;

struct Names {
  Variant v;
  std::string_view name;
};

constexpr Names kVariantNames[] = {{Variant::Baseline, "baseline"},
                                   {Variant::FcnOnly, "fcn-only"},
                                   {Variant::FcnLpnNoMmd, "fcn-lpn-no-mmd"},
                                   {Variant::LpnAlpha, "lpn-alpha"},
                                   {Variant::Full, "full"}};

LpnConfig lpn_config(const TrainConfig& cfg, std::size_t feature_dim) {
  LpnConfig c;
  c.feature_dim = feature_dim;
  c.num_layers = cfg.la_layers;
  c.kind = cfg.variant == Variant::LpnAlpha ? AttentionKind::Scalar : AttentionKind::Signed;
  return c;
}

}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& n : kVariantNames) {
    if (n.v == v) return n.name;
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (const auto& n : kVariantNames) {
    if (n.name == name) return n.v;
  }
  // Roman numerals follow the ablation table.
  constexpr std::string_view roman[] = {"i", "ii", "iii", "iv", "v"};
  for (std::size_t k = 0; k < 5; ++k) {
    if (roman[k] == name) return kAllVariants[k];
  }
  fail(Errc::BadConfig, "unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(Supervision s) {
  switch (s) {
    case Supervision::Auto: return "auto";
    case Supervision::SeenOnly: return "seen";
    case Supervision::SeenAndUnseen: return "seen+unseen";
  }
  return "?";
}

Supervision parse_supervision(std::string_view name) {
  if (name == "auto") return Supervision::Auto;
  if (name == "seen") return Supervision::SeenOnly;
  if (name == "seen+unseen") return Supervision::SeenAndUnseen;
  fail(Errc::BadConfig, "unknown supervision '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  const auto finite_nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  if (epochs < 1) fail(Errc::BadConfig, "epochs must be >= 1");
  if (!std::isfinite(lr) || lr <= 0.0) fail(Errc::BadConfig, "lr must be positive");
  if (!finite_nonneg(lambda) || !finite_nonneg(mu)) fail(Errc::BadConfig, "lambda and mu must be >= 0");
  if (hidden == 0) fail(Errc::BadConfig, "hidden must be positive");
  if (la_layers == 0) fail(Errc::BadConfig, "la_layers must be >= 1");
  if (runs == 0) fail(Errc::BadConfig, "runs must be >= 1");
  if (!finite_nonneg(adamw.weight_decay) || !(adamw.eps > 0.0) || !(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0) ||
      !(adamw.beta2 >= 0.0 && adamw.beta2 < 1.0)) {
    fail(Errc::BadConfig, "invalid AdamW hyperparameters");
  }
  SimilarityConfig{tau, channels}.validate();
}

bool TrainConfig::supervises_unseen() const {
  switch (supervision) {
    case Supervision::SeenOnly: return false;
    case Supervision::SeenAndUnseen: return true;
    case Supervision::Auto: return variant != Variant::Full;
  }
  return true;
}

std::vector<Parameter*> TrainedModel::parameters() {
  std::vector<Parameter*> out = fcn.parameters();
  if (lpn) {
    for (Parameter* p : lpn->parameters()) out.push_back(p);
  }
  return out;
}

TrainedModel make_model(const TrainConfig& cfg, std::size_t input_dim) {
  TrainedModel model;
  model.variant = cfg.variant;
  std::mt19937_64 fcn_rng(cfg.seed);
  FcnConfig fc;
  fc.input_dim = input_dim;
  fc.hidden = cfg.hidden;
  fc.gcn_layers = cfg.uses_gcn() ? cfg.gcn_layers : 0;
  fc.shared_self_weight = cfg.shared_self_weight;
  model.fcn = make_fcn(fc, fcn_rng);
  if (cfg.uses_lpn()) {
    // Separate stream so FCN weights match across variants for a seed.
    std::mt19937_64 lpn_rng(cfg.seed ^ kLpnSeedSalt);
    model.lpn = make_lpn(lpn_config(cfg, model.fcn.output_dim()), lpn_rng);
  }
  return model;
}

TrainResult train(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg) {
  cfg.validate();
  if (graph.num_nodes() != ds.size()) {
    fail(Errc::ShapeMismatch, "graph has " + std::to_string(graph.num_nodes()) + " nodes for " +
                                  std::to_string(ds.size()) + " records");
  }

  // Rows the training forward pass runs over.
  std::vector<std::uint32_t> nodes;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (cfg.transductive_train || ds.records[i].split != Split::Test) nodes.push_back(static_cast<std::uint32_t>(i));
  }
  const CrossModalGraph train_graph = cfg.transductive_train ? graph : graph.induced(nodes);
  const GraphIndex gi = train_graph.index();

  const Matrix all_x = node_features(ds);
  Matrix x(static_cast<Index>(nodes.size()), all_x.cols());
  std::vector<Target> targets;
  std::vector<Label> labels;
  std::vector<Split> splits;
  const bool with_unseen = cfg.supervises_unseen();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const TweetRecord& r = ds.records[nodes[k]];
    x.row(static_cast<Index>(k)) = all_x.row(nodes[k]);
    labels.push_back(r.label);
    splits.push_back(r.split);
    if (r.split == Split::Seen || (with_unseen && r.split == Split::Unseen)) {
      targets.push_back({static_cast<std::uint32_t>(k), r.label, r.split});
    }
  }
  if (targets.empty()) fail(Errc::DegenerateClass, "no supervised training records");

  DomainGroups groups;
  if (cfg.uses_mmd()) {
    groups = domain_groups(labels, splits);
    if (groups.seen_real.empty() || groups.seen_fake.empty() || groups.unseen_real.empty() ||
        groups.unseen_fake.empty()) {
      fail(Errc::DegenerateClass, std::string(to_string(cfg.variant)) +
                                      " needs both classes in the seen and the unseen subset");
    }
  }

  TrainResult result;
  result.model = make_model(cfg, static_cast<std::size_t>(all_x.cols()));
  TrainedModel& model = result.model;

  AdamW opt(model.parameters(), cfg.adamw, cfg.lr);
  const Reduction reduction = cfg.mean_reduction ? Reduction::Mean : Reduction::Sum;
  result.history.reserve(cfg.epochs);

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.zero_grad();
    Tape tape(false);
    const Var input = tape.constant(x);
    const Var xl = contextualize(tape, model.fcn, input, gi);
    const Var y_tilde = predict_initial(tape, model.fcn, xl);
    const Var l_fcn = ce_fcn(y_tilde, targets, reduction, &result.ce_reads);
    Var l_lpn = tape.constant(Matrix::Zero(1, 1));
    if (model.lpn) {
      const Var y_hat = propagate(tape, *model.lpn, y_tilde, xl, gi);
      l_lpn = ce_lpn(y_hat, targets, reduction, &result.ce_reads);
    }
    const Var l_mmd = cfg.uses_mmd() ? mmd_loss(tape, xl, groups) : tape.constant(Matrix::Zero(1, 1));
    const Var l_all = total_loss(l_fcn, l_lpn, l_mmd, cfg.lambda, cfg.mu);

    LossValues lv{l_fcn.value()(0, 0), l_lpn.value()(0, 0), l_mmd.value()(0, 0), l_all.value()(0, 0)};
    if (!std::isfinite(lv.l_all)) {
      fail(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + ": l_fcn=" + std::to_string(lv.l_fcn) +
                                    " l_lpn=" + std::to_string(lv.l_lpn) + " l_mmd=" + std::to_string(lv.l_mmd));
    }
    result.history.push_back(lv);
    tape.backward(l_all);
    opt.step();
  }
  result.steps = opt.steps();
  return result;
}

Matrix predict_probs(TrainedModel& model, const Dataset& ds, const CrossModalGraph& graph) {
  if (graph.num_nodes() != ds.size()) fail(Errc::ShapeMismatch, "graph and dataset sizes differ");
  const GraphIndex gi = graph.index();
  Tape tape(false);
  const Var xl = contextualize(tape, model.fcn, tape.constant(node_features(ds)), gi);
  const Var y_tilde = predict_initial(tape, model.fcn, xl);
  if (!model.lpn) return y_tilde.value();
  return propagate(tape, *model.lpn, y_tilde, xl, gi).value();
}

std::vector<Label> hard_labels(const Matrix& probs) {
  std::vector<Label> out(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = probs(i, 1) > probs(i, 0) ? Label::Fake : Label::Real;
  }
  return out;
}

}  // namespace fcnlp
