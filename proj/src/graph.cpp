#include "fcnlp/graph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "binary_io.hpp"
#include "fcnlp/error.hpp"

namespace fcnlp {

namespace {

constexpr std::pair<Channel, const char*> kChannelNames[] = {
    {Channel::II, "II"}, {Channel::TT, "TT"}, {Channel::IT, "IT"}, {Channel::TI, "TI"}};

// Row-normalised copy of one modality; throws ZeroVector on a zero row.
Matrix normalized_rows(const Dataset& ds, bool image) {
  const std::uint32_t d = image ? ds.d_img : ds.d_txt;
  Matrix m(static_cast<Index>(ds.size()), d);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& v = image ? ds.records[i].image_emb : ds.records[i].text_emb;
    for (std::uint32_t c = 0; c < d; ++c) m(static_cast<Index>(i), c) = v[c];
    const double norm = m.row(static_cast<Index>(i)).norm();
    if (norm == 0.0) {
      fail(Errc::ZeroVector, std::string(image ? "image" : "text") + " embedding of record '" +
                                 ds.records[i].id + "' is zero");
    }
    m.row(static_cast<Index>(i)) /= norm;
  }
  return m;
}

}  // namespace

std::vector<std::string> channel_names(ChannelMask mask) {
  std::vector<std::string> out;
  for (const auto& [c, name] : kChannelNames) {
    if (has_channel(mask, c)) out.emplace_back(name);
  }
  return out;
}

ChannelMask parse_channels(const std::string& list) {
  ChannelMask mask = 0;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char ch) { return std::isspace(ch); }),
              tok.end());
    bool known = false;
    for (const auto& [c, name] : kChannelNames) {
      if (tok == name) {
        mask |= mask_of(c);
        known = true;
      }
    }
    if (!known) fail(Errc::BadConfig, "unknown channel '" + tok + "' (expected II, TT, IT, TI)");
  }
  if (mask == 0) fail(Errc::BadConfig, "channel list is empty");
  return mask;
}

void SimilarityConfig::validate() const {
  if (!std::isfinite(tau) || tau <= 0.0 || tau > 1.0) {
    fail(Errc::BadConfig, "tau must lie in (0, 1], got " + std::to_string(tau));
  }
  if ((channels & kAllChannels) == 0) fail(Errc::BadConfig, "no similarity channel enabled");
}

CrossModalGraph::CrossModalGraph(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
  for (Edge& e : edges_) {
    if (e.i == e.j) fail(Errc::BadRecord, "self-loop on node " + std::to_string(e.i));
    if (e.i >= n_ || e.j >= n_) {
      fail(Errc::IndexOutOfRange, "edge {" + std::to_string(e.i) + "," + std::to_string(e.j) +
                                      "} outside a graph of " + std::to_string(n_) + " nodes");
    }
    if (e.channels == 0) fail(Errc::BadRecord, "edge without a channel");
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
  for (std::size_t k = 1; k < edges_.size(); ++k) {
    if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j) {
      fail(Errc::BadRecord, "duplicate edge {" + std::to_string(edges_[k].i) + "," +
                                std::to_string(edges_[k].j) + "}");
    }
  }

  std::vector<std::size_t> deg(n_, 0);
  for (const Edge& e : edges_) {
    ++deg[e.i];
    ++deg[e.j];
  }
  offsets_.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
  adj_.resize(offsets_[n_]);
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  // Edges are sorted by (i, j), so pushing j into i's list and i into j's
  // list yields ascending neighbour lists without a second sort.
  for (const Edge& e : edges_) adj_[fill[e.j]++] = e.i;
  for (const Edge& e : edges_) adj_[fill[e.i]++] = e.j;
}

void CrossModalGraph::check_node(std::size_t i) const {
  if (i >= n_) {
    fail(Errc::IndexOutOfRange, "node " + std::to_string(i) + " in a graph of " + std::to_string(n_));
  }
}

std::span<const std::uint32_t> CrossModalGraph::neighbors(std::size_t i) const {
  check_node(i);
  return {adj_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

std::size_t CrossModalGraph::degree(std::size_t i) const {
  check_node(i);
  return offsets_[i + 1] - offsets_[i];
}

const Edge* CrossModalGraph::find(std::size_t i, std::size_t j) const {
  check_node(i);
  check_node(j);
  if (i > j) std::swap(i, j);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair{i, j}, [](const Edge& e, const auto& key) {
    return e.i != key.first ? e.i < key.first : e.j < key.second;
  });
  if (it == edges_.end() || it->i != i || it->j != j) return nullptr;
  return &*it;
}

bool CrossModalGraph::has_edge(std::size_t i, std::size_t j) const { return find(i, j) != nullptr; }

ChannelMask CrossModalGraph::channels(std::size_t i, std::size_t j) const {
  const Edge* e = find(i, j);
  return e == nullptr ? 0 : e->channels;
}

double CrossModalGraph::norm_coeff(std::size_t i, std::size_t j) const {
  if (!has_edge(i, j)) {
    fail(Errc::NotAnEdge, "{" + std::to_string(i) + "," + std::to_string(j) + "} is not an edge");
  }
  return 1.0 / std::sqrt(static_cast<double>(degree(i)) * static_cast<double>(degree(j)));
}

double CrossModalGraph::avg_connections() const {
  return n_ == 0 ? 0.0 : 2.0 * static_cast<double>(edges_.size()) / static_cast<double>(n_);
}

CrossModalGraph CrossModalGraph::induced(std::span<const std::uint32_t> nodes) const {
  std::vector<std::int64_t> remap(n_, -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    check_node(nodes[k]);
    remap[nodes[k]] = static_cast<std::int64_t>(k);
  }
  std::vector<Edge> kept;
  for (const Edge& e : edges_) {
    if (remap[e.i] >= 0 && remap[e.j] >= 0) {
      kept.push_back({static_cast<std::uint32_t>(remap[e.i]), static_cast<std::uint32_t>(remap[e.j]), e.channels});
    }
  }
  return CrossModalGraph(nodes.size(), std::move(kept));
}

GraphIndex CrossModalGraph::index() const {
  GraphIndex gi;
  gi.n = n_;
  gi.gcn.rows = n_;
  gi.gcn.in_rows = n_;
  gi.gcn.offsets = offsets_;
  gi.gcn.cols = adj_;
  gi.gcn.weights.resize(adj_.size());
  gi.src.resize(adj_.size());
  gi.dst = adj_;
  for (std::size_t i = 0; i < n_; ++i) {
    const double di = static_cast<double>(offsets_[i + 1] - offsets_[i]);
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      const std::uint32_t j = adj_[k];
      const double dj = static_cast<double>(offsets_[j + 1] - offsets_[j]);
      gi.gcn.weights[k] = 1.0 / std::sqrt(di * dj);
      gi.src[k] = static_cast<std::uint32_t>(i);
    }
  }
  return gi;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    fail(Errc::DimMismatch, "cosine of vectors with lengths " + std::to_string(a.size()) + " and " +
                                std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += double{a[k]} * b[k];
    na += double{a[k]} * a[k];
    nb += double{b[k]} * b[k];
  }
  if (na == 0.0 || nb == 0.0) fail(Errc::ZeroVector, "cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

CrossModalGraph build_graph(const Dataset& ds, const SimilarityConfig& cfg) {
  cfg.validate();
  const std::size_t n = ds.size();
  ChannelMask active = cfg.channels;
  const ChannelMask cross = mask_of(Channel::IT) | mask_of(Channel::TI);
  if ((active & cross) != 0 && ds.d_img != ds.d_txt) {
    if (cfg.force_cross) {
      fail(Errc::DimMismatchCross, "cross-modal channels need equal dims, got " + std::to_string(ds.d_img) +
                                       " and " + std::to_string(ds.d_txt));
    }
    warn("image dim " + std::to_string(ds.d_img) + " != text dim " + std::to_string(ds.d_txt) +
         "; skipping IT/TI channels");
    active &= static_cast<ChannelMask>(~cross);
    if (active == 0) return CrossModalGraph(n, {});
  }

  const Matrix img = normalized_rows(ds, true);
  const Matrix txt = normalized_rows(ds, false);
  const double tau = cfg.tau;

  std::vector<Edge> edges;
  constexpr Index kBlock = 256;
  Matrix s_ii, s_tt, s_it, s_ti;
  for (Index r0 = 0; r0 < static_cast<Index>(n); r0 += kBlock) {
    const Index rows = std::min<Index>(kBlock, static_cast<Index>(n) - r0);
    // Block of rows r0.. against all columns; only j > i is read.
    if (has_channel(active, Channel::II)) s_ii.noalias() = img.middleRows(r0, rows) * img.transpose();
    if (has_channel(active, Channel::TT)) s_tt.noalias() = txt.middleRows(r0, rows) * txt.transpose();
    if (has_channel(active, Channel::IT)) s_it.noalias() = img.middleRows(r0, rows) * txt.transpose();
    if (has_channel(active, Channel::TI)) s_ti.noalias() = txt.middleRows(r0, rows) * img.transpose();
    for (Index bi = 0; bi < rows; ++bi) {
      const Index i = r0 + bi;
      for (Index j = i + 1; j < static_cast<Index>(n); ++j) {
        ChannelMask m = 0;
        if (has_channel(active, Channel::II) && s_ii(bi, j) >= tau) m |= mask_of(Channel::II);
        if (has_channel(active, Channel::TT) && s_tt(bi, j) >= tau) m |= mask_of(Channel::TT);
        if (has_channel(active, Channel::IT) && s_it(bi, j) >= tau) m |= mask_of(Channel::IT);
        if (has_channel(active, Channel::TI) && s_ti(bi, j) >= tau) m |= mask_of(Channel::TI);
        if (m != 0) edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), m});
      }
    }
  }
  return CrossModalGraph(n, std::move(edges));
}

std::string graph_to_json(const CrossModalGraph& g) {
  nlohmann::ordered_json doc;
  doc["n"] = g.num_nodes();
  doc["edges"] = nlohmann::ordered_json::array();
  for (const Edge& e : g.edges()) {
    doc["edges"].push_back({{"i", e.i}, {"j", e.j}, {"channels", channel_names(e.channels)}});
  }
  return doc.dump();
}

std::string graph_to_dot(const CrossModalGraph& g) {
  std::ostringstream os;
  os << "graph tweets {\n";
  for (std::size_t i = 0; i < g.num_nodes(); ++i) os << "  " << i << ";\n";
  for (const Edge& e : g.edges()) {
    os << "  " << e.i << " -- " << e.j << " [label=\"";
    const auto names = channel_names(e.channels);
    for (std::size_t k = 0; k < names.size(); ++k) os << (k ? "," : "") << names[k];
    os << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

void export_graph(const CrossModalGraph& g, const std::filesystem::path& path, GraphFormat format) {
  const std::string text = format == GraphFormat::Json ? graph_to_json(g) : graph_to_dot(g);
  detail::write_file(path, text);
}

}  // namespace fcnlp
