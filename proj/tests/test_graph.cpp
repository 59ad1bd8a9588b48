#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fcnlp/error.hpp"
#include "fcnlp/graph.hpp"
#include "test_util.hpp"

using namespace fcnlp;

namespace {

using testutil::error_code;

Dataset from_vectors(std::vector<std::vector<float>> img, std::vector<std::vector<float>> txt) {
  Dataset ds;
  ds.d_img = static_cast<std::uint32_t>(img[0].size());
  ds.d_txt = static_cast<std::uint32_t>(txt[0].size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    TweetRecord r;
    r.id = std::to_string(i);
    r.image_emb = img[i];
    r.text_emb = txt[i];
    ds.records.push_back(r);
  }
  return ds;
}

void check_matches_oracle(const Dataset& ds, double tau, ChannelMask channels) {
  const CrossModalGraph g = build_graph(ds, SimilarityConfig{tau, channels});
  const auto expected = oracle::brute_force_graph(ds, tau, channels);
  REQUIRE(g.num_edges() == expected.size());
  for (const Edge& e : g.edges()) {
    const auto it = expected.find({e.i, e.j});
    REQUIRE(it != expected.end());
    CHECK(it->second == e.channels);
  }
}

CrossModalGraph path3() { return CrossModalGraph(3, {{0, 1, 1}, {1, 2, 1}}); }

}  // namespace

TEST_CASE("cosine similarity by hand") {
  const std::vector<float> a = {1, 0}, b = {0, 1}, c = {1, 1};
  CHECK(cosine_similarity(a, a) == 1.0);
  CHECK(cosine_similarity(a, b) == 0.0);
  CHECK(std::abs(cosine_similarity(a, c) - 0.7071067811865475) <= 1e-12);
  const std::vector<float> z = {0, 0};
  CHECK(error_code([&] { cosine_similarity(a, z); }) == Errc::ZeroVector);
}

TEST_CASE("identical images connect through II") {
  const Dataset ds = from_vectors({{1, 2, 3}, {1, 2, 3}}, {{1, 0, 0}, {0, 1, 0}});
  const CrossModalGraph g = build_graph(ds, SimilarityConfig{0.99, kAllChannels});
  REQUIRE(g.num_edges() == 1);
  CHECK(has_channel(g.channels(0, 1), Channel::II));
  CHECK(!has_channel(g.channels(0, 1), Channel::TT));
}

TEST_CASE("mutually orthogonal embeddings give no edges") {
  const Dataset ds = from_vectors({{1, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0}},
                                  {{0, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 1, 0}, {0, 0, 0, 0, 0, 1}});
  CHECK(build_graph(ds, SimilarityConfig{0.5, kAllChannels}).num_edges() == 0);
}

TEST_CASE("cross channels are oriented: IT = cos(v_i, t_j), TI = cos(t_i, v_j)") {
  // v_0 equals t_1 only.
  const Dataset ds = from_vectors({{1, 0, 0}, {0, 1, 0}}, {{0, 0, 1}, {1, 0, 0}});
  const CrossModalGraph g = build_graph(ds, SimilarityConfig{0.9, kAllChannels});
  REQUIRE(g.num_edges() == 1);
  CHECK(g.channels(0, 1) == mask_of(Channel::IT));
  CHECK(g.channels(1, 0) == mask_of(Channel::IT));
}

TEST_CASE("similarity exactly at tau is an edge") {
  const Dataset same = from_vectors({{1, 0}, {1, 0}}, {{1, 0}, {0, 1}});
  CHECK(build_graph(same, SimilarityConfig{1.0, mask_of(Channel::II)}).num_edges() == 1);
  CHECK(build_graph(same, SimilarityConfig{1.0, mask_of(Channel::TT)}).num_edges() == 0);
}

TEST_CASE("10 random unit nodes at tau 0.9 equal the brute-force enumeration") {
  std::mt19937_64 rng(10);
  const Dataset ds = testutil::random_dataset(10, 3, 3, rng);
  check_matches_oracle(ds, 0.9, kAllChannels);
}

TEST_CASE("oracle equivalence and tau monotonicity on random datasets") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(2, 200), dim(2, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::uint32_t di = static_cast<std::uint32_t>(dim(rng));
    const std::uint32_t dt = trial % 2 ? di : static_cast<std::uint32_t>(dim(rng));
    const Dataset ds = testutil::random_dataset(static_cast<std::size_t>(size(rng)), di, dt, rng);
    const ChannelMask channels = static_cast<ChannelMask>(1 + trial % 15);
    check_matches_oracle(ds, 0.8, channels);
    std::size_t prev = ds.size() * ds.size();
    CrossModalGraph prev_graph;
    for (double tau : {0.85, 0.9, 0.95, 0.99}) {
      const CrossModalGraph g = build_graph(ds, SimilarityConfig{tau, channels});
      CHECK(g.num_edges() <= prev);
      for (const Edge& e : g.edges()) {
        if (prev_graph.num_nodes() > 0) CHECK(prev_graph.has_edge(e.i, e.j));
      }
      prev = g.num_edges();
      prev_graph = g;
    }
  }
}

TEST_CASE("unequal dims skip the cross channels unless forced") {
  std::mt19937_64 rng(7);
  const Dataset ds = testutil::random_dataset(30, 3, 4, rng);
  const CrossModalGraph g = build_graph(ds, SimilarityConfig{0.5, kAllChannels});
  for (const Edge& e : g.edges()) {
    CHECK(!has_channel(e.channels, Channel::IT));
    CHECK(!has_channel(e.channels, Channel::TI));
  }
  SimilarityConfig forced{0.5, kAllChannels, true};
  CHECK(error_code([&] { build_graph(ds, forced); }) == Errc::DimMismatchCross);
}

TEST_CASE("neighbors are sorted and symmetric") {
  const CrossModalGraph iso(3, {{0, 1, 1}});
  CHECK(iso.neighbors(2).empty());
  const CrossModalGraph p = path3();
  const std::vector<std::uint32_t> mid(p.neighbors(1).begin(), p.neighbors(1).end());
  CHECK(mid == std::vector<std::uint32_t>{0, 2});
  const CrossModalGraph star(5, {{3, 0, 1}, {0, 1, 1}, {4, 0, 2}, {0, 2, 1}});
  const std::vector<std::uint32_t> center(star.neighbors(0).begin(), star.neighbors(0).end());
  CHECK(center == std::vector<std::uint32_t>{1, 2, 3, 4});
  CHECK(star.has_edge(4, 0));
  CHECK(star.has_edge(0, 4));
  CHECK(star.degree(0) == 4);
  CHECK(error_code([&] { star.neighbors(5); }) == Errc::IndexOutOfRange);
}

TEST_CASE("norm_coeff is 1/sqrt(d_i d_j)") {
  const CrossModalGraph single(2, {{0, 1, 1}});
  CHECK(single.norm_coeff(0, 1) == 1.0);
  // Node 0 with degree 4, node 5 with degree 9: 0-5 plus 3 more for 0, 8 more for 5.
  std::vector<Edge> edges = {{0, 5, 1}, {0, 1, 1}, {0, 2, 1}, {0, 3, 1}};
  for (std::uint32_t k = 6; k < 14; ++k) edges.push_back({5, k, 1});
  const CrossModalGraph g(14, edges);
  CHECK(std::abs(g.norm_coeff(0, 5) - 1.0 / 6.0) <= 1e-15);
  const CrossModalGraph cycle(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 0, 1}});
  CHECK(cycle.norm_coeff(0, 1) == 0.5);
  CHECK(error_code([&] { cycle.norm_coeff(0, 2); }) == Errc::NotAnEdge);
}

TEST_CASE("construction rejects self-loops, duplicates and empty channel sets") {
  CHECK(error_code([] { CrossModalGraph(2, {{1, 1, 1}}); }) == Errc::BadRecord);
  CHECK(error_code([] { CrossModalGraph(2, {{0, 1, 1}, {1, 0, 2}}); }) == Errc::BadRecord);
  CHECK(error_code([] { CrossModalGraph(2, {{0, 1, 0}}); }) == Errc::BadRecord);
  CHECK(error_code([] { CrossModalGraph(2, {{0, 2, 1}}); }) == Errc::IndexOutOfRange);
}

TEST_CASE("avg_connections is 2|E|/n") {
  CHECK(CrossModalGraph().avg_connections() == 0.0);
  CHECK(path3().avg_connections() == 4.0 / 3.0);
}

TEST_CASE("induced subgraph keeps edges among the chosen nodes") {
  const CrossModalGraph g(4, {{0, 1, 1}, {1, 2, 2}, {2, 3, 4}, {0, 3, 8}});
  const std::vector<std::uint32_t> keep = {1, 2, 3};
  const CrossModalGraph sub = g.induced(keep);
  CHECK(sub.num_nodes() == 3);
  CHECK(sub.num_edges() == 2);
  CHECK(sub.channels(0, 1) == 2);
  CHECK(sub.channels(1, 2) == 4);
}

TEST_CASE("GCN index lists both orientations in (src, dst) order") {
  const GraphIndex gi = path3().index();
  CHECK(gi.src == std::vector<std::uint32_t>{0, 1, 1, 2});
  CHECK(gi.dst == std::vector<std::uint32_t>{1, 0, 2, 1});
  CHECK(gi.gcn.weights.size() == 4);
  CHECK(std::abs(gi.gcn.weights[0] - 1.0 / std::sqrt(2.0)) <= 1e-15);
}

TEST_CASE("permuting records yields an isomorphic graph") {
  std::mt19937_64 rng(12);
  Dataset ds = testutil::random_dataset(40, 3, 3, rng);
  const CrossModalGraph g = build_graph(ds, SimilarityConfig{0.6, kAllChannels});
  std::vector<std::uint32_t> perm(ds.size());
  for (std::uint32_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Dataset shuffled = ds;
  for (std::size_t k = 0; k < perm.size(); ++k) shuffled.records[k] = ds.records[perm[k]];
  const CrossModalGraph h = build_graph(shuffled, SimilarityConfig{0.6, kAllChannels});
  REQUIRE(h.num_edges() == g.num_edges());
  for (const Edge& e : h.edges()) {
    const std::uint32_t a = perm[e.i], b = perm[e.j];
    REQUIRE(g.has_edge(a, b));
    // Swapping endpoints swaps IT and TI.
    ChannelMask m = e.channels;
    if (a > b) {
      m = static_cast<ChannelMask>((m & 3) | ((m & 4) << 1) | ((m & 8) >> 1));
    }
    CHECK(g.channels(a, b) == m);
  }
}

TEST_CASE("JSON and DOT export") {
  CHECK(graph_to_json(CrossModalGraph()) == R"({"n":0,"edges":[]})");
  CHECK(graph_to_json(CrossModalGraph(2, {{1, 0, mask_of(Channel::TT)}})) ==
        R"({"n":2,"edges":[{"i":0,"j":1,"channels":["TT"]}]})");
  const CrossModalGraph tri(3, {{2, 1, 1}, {0, 2, 3}, {1, 0, 15}});
  CHECK(graph_to_json(tri) ==
        R"({"n":3,"edges":[{"i":0,"j":1,"channels":["II","TT","IT","TI"]},{"i":0,"j":2,"channels":["II","TT"]},{"i":1,"j":2,"channels":["II"]}]})");
  const std::string dot = graph_to_dot(tri);
  CHECK(dot.find("graph") == 0);
  CHECK(dot.find("0 -- 1") != std::string::npos);
  CHECK(dot.find("II,TT") != std::string::npos);

  const auto dir = testutil::temp_dir("graph_export");
  export_graph(tri, dir / "g.json", GraphFormat::Json);
  std::ifstream in(dir / "g.json");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().rfind(graph_to_json(tri), 0) == 0);
  CHECK(error_code([&] { export_graph(tri, dir / "missing" / "g.json", GraphFormat::Json); }) == Errc::IoError);
}

TEST_CASE("channel list parsing and tau validation") {
  CHECK(parse_channels("II,TT,IT,TI") == kAllChannels);
  CHECK(parse_channels("TT") == mask_of(Channel::TT));
  CHECK(error_code([] { parse_channels("XX"); }) == Errc::BadConfig);
  CHECK(error_code([] { parse_channels(""); }) == Errc::BadConfig);
  CHECK(error_code([] { SimilarityConfig{1.01, kAllChannels}.validate(); }) == Errc::BadConfig);
  CHECK(error_code([] { SimilarityConfig{0.0, kAllChannels}.validate(); }) == Errc::BadConfig);
  CHECK(error_code([] { SimilarityConfig{std::nan(""), kAllChannels}.validate(); }) == Errc::BadConfig);
  CHECK_NOTHROW(SimilarityConfig{1.0, kAllChannels}.validate());
}
