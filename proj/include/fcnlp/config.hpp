#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "fcnlp/synth.hpp"
#include "fcnlp/trainer.hpp"

namespace fcnlp {

// Plain-text configuration: one `key = value` per line, `#` starts a
// comment, blank lines are ignored. Keys are the long flag names without the
// leading dashes (tau, lambda, gcn-layers, ...). Booleans accept
// true/false/1/0. Unknown keys and malformed values throw BadConfig.

void apply_setting(TrainConfig& cfg, std::string_view key, std::string_view value);
bool is_train_key(std::string_view key);

// Applies every line of `text` on top of `base`; later lines win.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

// Every field, one per line, in a form parse_config reads back exactly.
std::string format_config(const TrainConfig& cfg);

// Synthetic generator settings use the same syntax (keys: events, per-event,
// dim, fake-offset, noise, shared-fake, unseen-events, test-events, seed).
void apply_setting(SynthConfig& cfg, std::string_view key, std::string_view value);
SynthConfig parse_synth_config(std::string_view text, SynthConfig base = {});
std::string format_config(const SynthConfig& cfg);

// Exact text form of a double (shortest round-trip representation).
std::string format_double(double x);

}  // namespace fcnlp
