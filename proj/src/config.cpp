#include "fcnlp/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "binary_io.hpp"
#include "fcnlp/error.hpp"

namespace fcnlp {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  fail(Errc::BadConfig, "invalid value '" + std::string(value) + "' for '" + std::string(key) + "' (expected " +
                            std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view value) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(x)) {
    bad_value(key, value, "a finite number");
  }
  return x;
}

template <typename T>
T to_uint(std::string_view key, std::string_view value) {
  T x = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a non-negative integer");
  return x;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

std::string join_channels(ChannelMask mask) {
  std::string out;
  for (const std::string& name : channel_names(mask)) {
    if (!out.empty()) out += ',';
    out += name;
  }
  return out;
}

// Calls apply(key, value) for every non-comment line.
template <typename Apply>
void for_each_setting(std::string_view text, Apply&& apply) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(Errc::BadConfig, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

constexpr std::string_view kTrainKeys[] = {
    "tau",      "lambda",      "mu",           "lr",     "epochs",         "hidden",
    "gcn-layers", "la-layers", "seed",         "runs",   "variant",        "channels",
    "transductive-train",      "shared-self-weight",     "mean-reduction", "supervision",
    "beta1",    "beta2",       "eps",          "weight-decay"};

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

bool is_train_key(std::string_view key) {
  for (std::string_view k : kTrainKeys) {
    if (k == key) return true;
  }
  return false;
}

void apply_setting(TrainConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "tau") cfg.tau = to_double(key, value);
  else if (key == "lambda") cfg.lambda = to_double(key, value);
  else if (key == "mu") cfg.mu = to_double(key, value);
  else if (key == "lr") cfg.lr = to_double(key, value);
  else if (key == "epochs") cfg.epochs = to_uint<std::uint32_t>(key, value);
  else if (key == "hidden") cfg.hidden = to_uint<std::uint32_t>(key, value);
  else if (key == "gcn-layers") cfg.gcn_layers = to_uint<std::uint32_t>(key, value);
  else if (key == "la-layers") cfg.la_layers = to_uint<std::uint32_t>(key, value);
  else if (key == "seed") cfg.seed = to_uint<std::uint64_t>(key, value);
  else if (key == "runs") cfg.runs = to_uint<std::uint32_t>(key, value);
  else if (key == "variant") cfg.variant = parse_variant(value);
  else if (key == "channels") cfg.channels = parse_channels(std::string(value));
  else if (key == "transductive-train") cfg.transductive_train = to_bool(key, value);
  else if (key == "shared-self-weight") cfg.shared_self_weight = to_bool(key, value);
  else if (key == "mean-reduction") cfg.mean_reduction = to_bool(key, value);
  else if (key == "supervision") cfg.supervision = parse_supervision(value);
  else if (key == "beta1") cfg.adamw.beta1 = to_double(key, value);
  else if (key == "beta2") cfg.adamw.beta2 = to_double(key, value);
  else if (key == "eps") cfg.adamw.eps = to_double(key, value);
  else if (key == "weight-decay") cfg.adamw.weight_decay = to_double(key, value);
  else fail(Errc::BadConfig, "unknown config key '" + std::string(key) + "'");
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  for_each_setting(text, [&](std::string_view k, std::string_view v) { apply_setting(base, k, v); });
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  const std::vector<char> bytes = detail::read_file(path);
  return parse_config(std::string_view(bytes.data(), bytes.size()), base);
}

std::string format_config(const TrainConfig& cfg) {
  std::ostringstream os;
  const auto b = [](bool x) { return x ? "true" : "false"; };
  os << "tau = " << format_double(cfg.tau) << '\n'
     << "lambda = " << format_double(cfg.lambda) << '\n'
     << "mu = " << format_double(cfg.mu) << '\n'
     << "lr = " << format_double(cfg.lr) << '\n'
     << "epochs = " << cfg.epochs << '\n'
     << "hidden = " << cfg.hidden << '\n'
     << "gcn-layers = " << cfg.gcn_layers << '\n'
     << "la-layers = " << cfg.la_layers << '\n'
     << "seed = " << cfg.seed << '\n'
     << "runs = " << cfg.runs << '\n'
     << "variant = " << to_string(cfg.variant) << '\n'
     << "channels = " << join_channels(cfg.channels) << '\n'
     << "transductive-train = " << b(cfg.transductive_train) << '\n'
     << "shared-self-weight = " << b(cfg.shared_self_weight) << '\n'
     << "mean-reduction = " << b(cfg.mean_reduction) << '\n'
     << "supervision = " << to_string(cfg.supervision) << '\n'
     << "beta1 = " << format_double(cfg.adamw.beta1) << '\n'
     << "beta2 = " << format_double(cfg.adamw.beta2) << '\n'
     << "eps = " << format_double(cfg.adamw.eps) << '\n'
     << "weight-decay = " << format_double(cfg.adamw.weight_decay) << '\n';
  return os.str();
}

void apply_setting(SynthConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "events") cfg.events = to_uint<std::uint32_t>(key, value);
  else if (key == "per-event") cfg.per_event = to_uint<std::uint32_t>(key, value);
  else if (key == "dim") cfg.dim = to_uint<std::uint32_t>(key, value);
  else if (key == "fake-offset") cfg.fake_offset = to_double(key, value);
  else if (key == "noise") cfg.noise = to_double(key, value);
  else if (key == "shared-fake") cfg.shared_fake = to_double(key, value);
  else if (key == "unseen-events") cfg.unseen_events = to_uint<std::uint32_t>(key, value);
  else if (key == "test-events") cfg.test_events = to_uint<std::uint32_t>(key, value);
  else if (key == "seed") cfg.seed = to_uint<std::uint64_t>(key, value);
  else fail(Errc::BadConfig, "unknown synth key '" + std::string(key) + "'");
}

SynthConfig parse_synth_config(std::string_view text, SynthConfig base) {
  for_each_setting(text, [&](std::string_view k, std::string_view v) { apply_setting(base, k, v); });
  return base;
}

std::string format_config(const SynthConfig& cfg) {
  std::ostringstream os;
  os << "events = " << cfg.events << '\n'
     << "per-event = " << cfg.per_event << '\n'
     << "dim = " << cfg.dim << '\n'
     << "fake-offset = " << format_double(cfg.fake_offset) << '\n'
     << "noise = " << format_double(cfg.noise) << '\n'
     << "shared-fake = " << format_double(cfg.shared_fake) << '\n'
     << "unseen-events = " << cfg.unseen_events << '\n'
     << "test-events = " << cfg.test_events << '\n'
     << "seed = " << cfg.seed << '\n';
  return os.str();
}

}  // namespace fcnlp
