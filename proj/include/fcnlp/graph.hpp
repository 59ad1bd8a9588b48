#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcnlp/dataset.hpp"
#include "fcnlp/tensor.hpp"

namespace fcnlp {

// Similarity channels. For a canonical pair (i, j) with i < j:
//   II = cos(v_i, v_j), TT = cos(t_i, t_j), IT = cos(v_i, t_j), TI = cos(t_i, v_j).
enum class Channel : std::uint8_t { II = 1, TT = 2, IT = 4, TI = 8 };

using ChannelMask = std::uint8_t;
inline constexpr ChannelMask kAllChannels = 0x0F;

inline constexpr ChannelMask mask_of(Channel c) { return static_cast<ChannelMask>(c); }
inline constexpr bool has_channel(ChannelMask m, Channel c) { return (m & mask_of(c)) != 0; }

std::vector<std::string> channel_names(ChannelMask mask);
// Parses "II,TT,IT,TI" (any subset, any order). Throws BadConfig.
ChannelMask parse_channels(const std::string& list);

struct SimilarityConfig {
  double tau = 0.95;
  ChannelMask channels = kAllChannels;
  // Throw DimMismatchCross instead of skipping IT/TI when dims differ.
  bool force_cross = false;

  void validate() const;
};

struct Edge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  ChannelMask channels = 0;

  bool operator==(const Edge&) const = default;
};

// Inputs for message passing over a graph, built once per graph.
struct GraphIndex {
  std::size_t n = 0;
  // 1/sqrt(|N_i||N_j|) weights, rows in node order, neighbours ascending.
  SparseRows gcn;
  // Directed edge list (both orientations), ordered by (src, dst).
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> dst;
};

class CrossModalGraph {
 public:
  CrossModalGraph() = default;
  // Canonicalises to i < j, sorts, rejects self-loops, duplicates and
  // empty channel sets.
  CrossModalGraph(std::size_t n, std::vector<Edge> edges);

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const std::uint32_t> neighbors(std::size_t i) const;
  std::size_t degree(std::size_t i) const;
  bool has_edge(std::size_t i, std::size_t j) const;
  ChannelMask channels(std::size_t i, std::size_t j) const;
  double norm_coeff(std::size_t i, std::size_t j) const;

  // 2|E| / n; zero for an empty graph.
  double avg_connections() const;

  // Subgraph on `nodes` (new index k = position in `nodes`).
  CrossModalGraph induced(std::span<const std::uint32_t> nodes) const;

  GraphIndex index() const;

 private:
  void check_node(std::size_t i) const;
  const Edge* find(std::size_t i, std::size_t j) const;

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> adj_;
};

double cosine_similarity(std::span<const float> a, std::span<const float> b);

CrossModalGraph build_graph(const Dataset& ds, const SimilarityConfig& cfg);

enum class GraphFormat { Json, Dot };

void export_graph(const CrossModalGraph& g, const std::filesystem::path& path, GraphFormat format);
std::string graph_to_json(const CrossModalGraph& g);
std::string graph_to_dot(const CrossModalGraph& g);

}  // namespace fcnlp
