#include "fcnlp/synth.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fcnlp/error.hpp"

namespace fcnlp {

namespace {

using Vec = std::vector<double>;

Vec gaussian(std::uint32_t dim, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sd);
  Vec v(dim);
  for (auto& x : v) x = dist(rng);
  return v;
}

Vec normalized(Vec v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
  return v;
}

Vec unit(std::uint32_t dim, std::mt19937_64& rng) { return normalized(gaussian(dim, 1.0, rng)); }

std::vector<float> to_float(const Vec& v) { return {v.begin(), v.end()}; }

}  // namespace

void SynthConfig::validate() const {
  if (events < 2) fail(Errc::BadConfig, "gen_synth needs at least 2 events");
  if (per_event == 0 || dim == 0) fail(Errc::BadConfig, "per_event and dim must be positive");
  if (!std::isfinite(fake_offset) || !std::isfinite(noise) || noise < 0.0 || fake_offset < 0.0) {
    fail(Errc::BadConfig, "noise and fake_offset must be finite and nonnegative");
  }
  if (!std::isfinite(shared_fake) || shared_fake < 0.0 || shared_fake > 1.0) {
    fail(Errc::BadConfig, "shared_fake must lie in [0, 1]");
  }
  if (std::uint64_t{unseen_events} + test_events >= events) {
    fail(Errc::BadConfig, "need at least one seen event besides " + std::to_string(unseen_events) +
                              " unseen and " + std::to_string(test_events) + " test events");
  }
}

Dataset gen_synth(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const double sd = cfg.noise / std::sqrt(static_cast<double>(cfg.dim));
  const Vec shared = unit(cfg.dim, rng);

  Dataset ds;
  ds.d_img = cfg.dim;
  ds.d_txt = cfg.dim;
  ds.records.reserve(std::size_t{cfg.events} * cfg.per_event);
  const std::uint32_t first_unseen = cfg.events - cfg.test_events - cfg.unseen_events;
  const std::uint32_t first_test = cfg.events - cfg.test_events;

  for (std::uint32_t e = 0; e < cfg.events; ++e) {
    const Vec center = unit(cfg.dim, rng);
    const Vec own = unit(cfg.dim, rng);
    Vec fake_dir(cfg.dim);
    for (std::uint32_t k = 0; k < cfg.dim; ++k) {
      fake_dir[k] = cfg.shared_fake * shared[k] + (1.0 - cfg.shared_fake) * own[k];
    }
    fake_dir = normalized(std::move(fake_dir));
    const Split split = e >= first_test ? Split::Test : (e >= first_unseen ? Split::Unseen : Split::Seen);

    for (std::uint32_t k = 0; k < cfg.per_event; ++k) {
      const bool fake = (k % 2) == 1;
      Vec img = gaussian(cfg.dim, sd, rng);
      Vec txt = gaussian(cfg.dim, sd, rng);
      for (std::uint32_t c = 0; c < cfg.dim; ++c) {
        img[c] += center[c];
        txt[c] += center[c] + (fake ? cfg.fake_offset * fake_dir[c] : 0.0);
      }
      TweetRecord r;
      r.id = "e" + std::to_string(e) + "_" + std::to_string(k);
      r.image_emb = to_float(normalized(std::move(img)));
      r.text_emb = to_float(normalized(std::move(txt)));
      r.label = fake ? Label::Fake : Label::Real;
      r.event_id = e;
      r.split = split;
      ds.records.push_back(std::move(r));
    }
  }
  validate(ds);
  return ds;
}

}  // namespace fcnlp
