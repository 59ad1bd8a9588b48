#pragma once

#include <cstdint>

#include "fcnlp/dataset.hpp"

namespace fcnlp {

// Event-clustered synthetic tweets. Every event has a random unit center;
// image and text embeddings are the center plus isotropic Gaussian noise of
// expected norm `noise`, then L2-normalised. Fake tweets additionally shift
// their text by `fake_offset` along the event's fake direction, a unit
// vector mixing a direction shared by all events (weight `shared_fake`)
// with an event-specific one. Labels alternate real/fake inside an event.
// Whole events go to Seen, Unseen and Test (the last `test_events` events
// are Test, the `unseen_events` before them Unseen).
struct SynthConfig {
  std::uint32_t events = 6;
  std::uint32_t per_event = 100;
  std::uint32_t dim = 32;
  double fake_offset = 0.5;
  double noise = 0.15;
  double shared_fake = 0.8;
  std::uint32_t unseen_events = 1;
  std::uint32_t test_events = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

Dataset gen_synth(const SynthConfig& cfg);

}  // namespace fcnlp
