#include <set>

#include "fcnlp/graph.hpp"
#include "fcnlp/synth.hpp"
#include "test_util.hpp"

using namespace fcnlp;
using testutil::error_code;

TEST_CASE("default generator layout") {
  const SynthConfig cfg;
  const Dataset ds = gen_synth(cfg);
  REQUIRE(ds.size() == 600);
  CHECK(ds.d_img == 32);
  CHECK(ds.d_txt == 32);
  std::set<std::uint32_t> seen, unseen, test;
  std::size_t fake = 0;
  for (const TweetRecord& r : ds.records) {
    (r.split == Split::Seen ? seen : r.split == Split::Unseen ? unseen : test).insert(r.event_id);
    if (r.label == Label::Fake) ++fake;
    double n = 0.0;
    for (float x : r.image_emb) n += double(x) * x;
    CHECK(std::abs(n - 1.0) <= 1e-5);
  }
  CHECK(fake == 300);
  CHECK(seen == std::set<std::uint32_t>{0, 1, 2});
  CHECK(unseen == std::set<std::uint32_t>{3});
  CHECK(test == std::set<std::uint32_t>{4, 5});
}

TEST_CASE("same seed gives identical records, different seeds differ") {
  SynthConfig cfg;
  cfg.per_event = 10;
  const Dataset a = gen_synth(cfg), b = gen_synth(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.records[i].image_emb == b.records[i].image_emb);
    CHECK(a.records[i].text_emb == b.records[i].text_emb);
  }
  cfg.seed = 1;
  CHECK(gen_synth(cfg).records[0].image_emb != a.records[0].image_emb);
}

TEST_CASE("events form dense text clusters at high tau") {
  const Dataset ds = gen_synth(SynthConfig{});
  const CrossModalGraph g = build_graph(ds, SimilarityConfig{0.95, mask_of(Channel::II)});
  std::size_t within = 0;
  for (const Edge& e : g.edges()) within += ds.records[e.i].event_id == ds.records[e.j].event_id;
  CHECK(within == g.num_edges());
  CHECK(g.avg_connections() > 50.0);
}

TEST_CASE("generator validation") {
  const auto bad = [](auto edit) {
    SynthConfig c;
    edit(c);
    return error_code([&] { gen_synth(c); });
  };
  CHECK(bad([](SynthConfig& c) { c.events = 1; }) == Errc::BadConfig);
  CHECK(bad([](SynthConfig& c) { c.per_event = 0; }) == Errc::BadConfig);
  CHECK(bad([](SynthConfig& c) { c.noise = -1; }) == Errc::BadConfig);
  CHECK(bad([](SynthConfig& c) { c.shared_fake = 1.5; }) == Errc::BadConfig);
  CHECK(bad([](SynthConfig& c) { c.unseen_events = 2; c.test_events = 4; }) == Errc::BadConfig);
}
