#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fcnlp/dataset.hpp"
#include "fcnlp/fcn.hpp"
#include "fcnlp/graph.hpp"
#include "fcnlp/losses.hpp"
#include "fcnlp/lpn.hpp"
#include "fcnlp/optim.hpp"

namespace fcnlp {

// Ablation variants, in table order (i)..(v).
enum class Variant {
  Baseline,     // MLP head on raw concatenated features
  FcnOnly,      // GCN stack + head
  FcnLpnNoMmd,  // + signed label propagation, no MMD, unseen merged into seen
  LpnAlpha,     // scalar [0, 1] attention instead of signed
  Full,         // FCN + LPN + MMD with the seen/unseen protocol
};

inline constexpr Variant kAllVariants[] = {Variant::Baseline, Variant::FcnOnly, Variant::FcnLpnNoMmd,
                                           Variant::LpnAlpha, Variant::Full};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

// Which training records feed the cross-entropy terms. Auto picks
// SeenOnly for Full and SeenAndUnseen for every other variant.
enum class Supervision { Auto, SeenOnly, SeenAndUnseen };

std::string_view to_string(Supervision s);
Supervision parse_supervision(std::string_view name);

struct TrainConfig {
  double tau = 0.95;
  double lambda = 1.0;
  double mu = 1.0;
  double lr = 1e-4;
  std::uint32_t epochs = 500;
  std::uint32_t gcn_layers = 4;
  std::uint32_t la_layers = 2;
  std::uint32_t hidden = 256;
  std::uint64_t seed = 0;
  std::uint32_t runs = 5;
  AdamWConfig adamw;
  Variant variant = Variant::Full;
  ChannelMask channels = kAllChannels;
  bool transductive_train = false;
  bool shared_self_weight = false;
  bool mean_reduction = false;
  Supervision supervision = Supervision::Auto;

  void validate() const;

  bool uses_gcn() const { return variant != Variant::Baseline; }
  bool uses_lpn() const { return variant != Variant::Baseline && variant != Variant::FcnOnly; }
  bool uses_mmd() const { return variant == Variant::LpnAlpha || variant == Variant::Full; }
  bool supervises_unseen() const;
};

struct TrainedModel {
  Variant variant = Variant::Full;
  FcnModel fcn;
  std::optional<LpnModel> lpn;

  std::vector<Parameter*> parameters();
};

// Freshly initialised model for cfg.variant, seeded from cfg.seed.
TrainedModel make_model(const TrainConfig& cfg, std::size_t input_dim);

struct TrainResult {
  TrainedModel model;
  std::vector<LossValues> history;
  LabelReadCounter ce_reads;
  std::size_t steps = 0;
};

// Full-batch training. `graph` spans every record of `ds`; unless
// transductive_train is set, only the subgraph induced by Seen and Unseen
// records is used during training.
TrainResult train(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg);

// Class probabilities for every record (propagated labels for LPN variants,
// head output otherwise), running over the whole graph.
Matrix predict_probs(TrainedModel& model, const Dataset& ds, const CrossModalGraph& graph);

// Fake iff p_fake > p_real; ties go to Real.
std::vector<Label> hard_labels(const Matrix& probs);

}  // namespace fcnlp
