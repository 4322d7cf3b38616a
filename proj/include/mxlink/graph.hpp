// Multiplex graph data model and edge-list ingestion.
//
// A multiplex network is an ordered set of undirected simple layers over one
// shared node vocabulary. Edges are unweighted; weights in input files are
// parsed and discarded. Dense node ids are assigned in first-appearance order
// so a given file always loads to the same graph.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mxlink/error.hpp"
#include "mxlink/io.hpp"
#include "mxlink/rng.hpp"

namespace mxlink {

using NodeId = int32_t;
using NodePair = std::pair<NodeId, NodeId>;  // canonical: first < second

inline NodePair canonical_pair(NodeId a, NodeId b) {
  return a < b ? NodePair{a, b} : NodePair{b, a};
}

/// One layer: an undirected simple edge set plus derived sorted adjacency.
class LayerGraph {
 public:
  LayerGraph() = default;

  /// Takes any mix of orientations/duplicates, canonicalizes and dedups.
  /// Self-loops are a caller error here (the parser drops them earlier).
  LayerGraph(NodeId node_count, std::vector<NodePair> edges)
      : node_count_(node_count) {
    for (auto& e : edges) e = canonical_pair(e.first, e.second);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& [u, v] : edges) {
      if (u == v) throw DataError("layer contains a self-loop");
      if (u < 0 || v >= node_count_)
        throw DataError("edge endpoint outside node range");
    }
    edges_ = std::move(edges);
    adjacency_.assign(static_cast<size_t>(node_count_), {});
    for (const auto& [u, v] : edges_) {
      adjacency_[static_cast<size_t>(u)].push_back(v);
      adjacency_[static_cast<size_t>(v)].push_back(u);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
  }

  NodeId node_count() const { return node_count_; }
  const std::vector<NodePair>& edges() const { return edges_; }
  size_t edge_count() const { return edges_.size(); }

  const std::vector<NodeId>& neighbors(NodeId u) const {
    return adjacency_[static_cast<size_t>(u)];
  }
  int degree(NodeId u) const {
    return static_cast<int>(adjacency_[static_cast<size_t>(u)].size());
  }

  bool has_edge(NodeId a, NodeId b) const {
    const auto e = canonical_pair(a, b);
    return std::binary_search(edges_.begin(), edges_.end(), e);
  }

 private:
  NodeId node_count_ = 0;
  std::vector<NodePair> edges_;            // sorted, unique, u < v
  std::vector<std::vector<NodeId>> adjacency_;  // sorted neighbor lists
};

struct MultiplexGraph {
  NodeId node_count = 0;
  std::vector<std::string> node_labels;   // indexed by dense node id
  std::vector<std::string> layer_names;
  std::vector<LayerGraph> layers;

  int layer_count() const { return static_cast<int>(layers.size()); }

  size_t total_edges() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.edge_count();
    return n;
  }

  /// Content hash used in config fingerprints.
  uint64_t content_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a64_bytes(&node_count, sizeof(node_count), h);
    for (const auto& s : node_labels) h = fnv1a64_bytes(s.data(), s.size(), h);
    for (const auto& s : layer_names) h = fnv1a64_bytes(s.data(), s.size(), h);
    for (const auto& l : layers)
      for (const auto& [u, v] : l.edges()) {
        h = fnv1a64_bytes(&u, sizeof(u), h);
        h = fnv1a64_bytes(&v, sizeof(v), h);
      }
    return h;
  }
};

inline void validate_graph(const MultiplexGraph& g) {
  if (g.node_count < 1) throw DataError("graph has no nodes");
  if (g.layer_count() < 2)
    throw DataError("multiplex graph needs at least 2 layers, got " +
                    std::to_string(g.layer_count()));
  if (g.node_labels.size() != static_cast<size_t>(g.node_count))
    throw DataError("node label count does not match node count");
  if (g.layer_names.size() != g.layers.size())
    throw DataError("layer name count does not match layer count");
  for (const auto& l : g.layers)
    if (l.node_count() != g.node_count)
      throw DataError("layer node count mismatch");
}

// ---------------------------------------------------------------------------
// Edge-list parsing
//
// Format `layer_first`: one edge per line, `layer node node [weight]`,
// tokens separated by spaces or tabs, '#' starts a comment line.
// ---------------------------------------------------------------------------

enum class EdgeListFormat { layer_first };

struct ParseStats {
  long self_loops_dropped = 0;
  long duplicates_dropped = 0;
};

inline MultiplexGraph parse_multiplex_edgelist(
    std::istream& in, EdgeListFormat format = EdgeListFormat::layer_first,
    ParseStats* stats = nullptr) {
  (void)format;  // single format today
  std::unordered_map<std::string, NodeId> node_ids;
  std::unordered_map<std::string, int> layer_ids;
  MultiplexGraph g;
  std::vector<std::vector<NodePair>> layer_edges;
  ParseStats local;

  auto node_id = [&](const std::string& tok) {
    auto it = node_ids.find(tok);
    if (it != node_ids.end()) return it->second;
    const NodeId id = static_cast<NodeId>(g.node_labels.size());
    node_ids.emplace(tok, id);
    g.node_labels.push_back(tok);
    return id;
  };

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Strip a trailing CR so CRLF files parse cleanly.
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> tok;
    std::istringstream ls(line);
    std::string t;
    while (ls >> t) tok.push_back(t);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok.size() < 3 || tok.size() > 4)
      throw DataError("line " + std::to_string(line_no) +
                      ": expected `layer node node [weight]`, got " +
                      std::to_string(tok.size()) + " tokens");
    if (tok.size() == 4) {
      // Weight is validated then discarded: edges are binary.
      try {
        size_t used = 0;
        std::stod(tok[3], &used);
        if (used != tok[3].size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) +
                        ": weight token is not a number: " + tok[3]);
      }
    }
    int layer;
    auto lit = layer_ids.find(tok[0]);
    if (lit != layer_ids.end()) {
      layer = lit->second;
    } else {
      layer = static_cast<int>(g.layer_names.size());
      layer_ids.emplace(tok[0], layer);
      g.layer_names.push_back(tok[0]);
      layer_edges.emplace_back();
    }
    const NodeId u = node_id(tok[1]);
    const NodeId v = node_id(tok[2]);
    if (u == v) {
      ++local.self_loops_dropped;
      continue;
    }
    const NodePair e = canonical_pair(u, v);
    auto& edges = layer_edges[static_cast<size_t>(layer)];
    if (std::find(edges.begin(), edges.end(), e) != edges.end()) {
      ++local.duplicates_dropped;
      continue;
    }
    edges.push_back(e);
  }

  g.node_count = static_cast<NodeId>(g.node_labels.size());
  for (auto& edges : layer_edges)
    g.layers.emplace_back(g.node_count, std::move(edges));
  validate_graph(g);
  if (stats) *stats = local;
  return g;
}

inline MultiplexGraph parse_multiplex_edgelist(
    const std::string& text, EdgeListFormat format = EdgeListFormat::layer_first,
    ParseStats* stats = nullptr) {
  std::istringstream in(text);
  return parse_multiplex_edgelist(in, format, stats);
}

/// Writes the graph back as `layer_name node_label node_label` lines.
/// Edges are ordered by label, not dense id, so the output is a canonical
/// function of the labeled structure (parse -> serialize is idempotent).
inline void serialize_multiplex_edgelist(const MultiplexGraph& g,
                                         std::ostream& out) {
  for (size_t m = 0; m < g.layers.size(); ++m) {
    std::vector<std::pair<std::string, std::string>> lines;
    lines.reserve(g.layers[m].edge_count());
    for (const auto& [u, v] : g.layers[m].edges()) {
      std::string a = g.node_labels[static_cast<size_t>(u)];
      std::string b = g.node_labels[static_cast<size_t>(v)];
      if (b < a) std::swap(a, b);
      lines.emplace_back(std::move(a), std::move(b));
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& [a, b] : lines)
      out << g.layer_names[m] << ' ' << a << ' ' << b << '\n';
  }
}

inline std::string serialize_multiplex_edgelist(const MultiplexGraph& g) {
  std::ostringstream out;
  serialize_multiplex_edgelist(g, out);
  return out.str();
}

/// Equality of the labeled structure: same labels/layers and, per layer, the
/// same edge set under the label correspondence. Insensitive to dense-id
/// assignment order, which is what a serialize/re-parse round trip permutes.
inline bool same_labeled_graph(const MultiplexGraph& a,
                               const MultiplexGraph& b) {
  if (a.node_count != b.node_count) return false;
  if (a.layer_names != b.layer_names) return false;
  std::unordered_map<std::string, NodeId> b_ids;
  for (NodeId i = 0; i < b.node_count; ++i) b_ids[b.node_labels[i]] = i;
  std::vector<NodeId> map_ab(static_cast<size_t>(a.node_count));
  for (NodeId i = 0; i < a.node_count; ++i) {
    auto it = b_ids.find(a.node_labels[static_cast<size_t>(i)]);
    if (it == b_ids.end()) return false;
    map_ab[static_cast<size_t>(i)] = it->second;
  }
  for (size_t m = 0; m < a.layers.size(); ++m) {
    if (a.layers[m].edge_count() != b.layers[m].edge_count()) return false;
    std::vector<NodePair> mapped;
    mapped.reserve(a.layers[m].edge_count());
    for (const auto& [u, v] : a.layers[m].edges())
      mapped.push_back(canonical_pair(map_ab[static_cast<size_t>(u)],
                                      map_ab[static_cast<size_t>(v)]));
    std::sort(mapped.begin(), mapped.end());
    if (mapped != b.layers[m].edges()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Union-Set candidate pool and labeling
// ---------------------------------------------------------------------------

/// The Union-Set: every node pair observed as an edge in at least one layer,
/// sorted lexicographically, duplicate-free.
struct CandidatePool {
  std::vector<NodePair> pairs;
  size_t size() const { return pairs.size(); }
};

inline CandidatePool build_union_pool(const MultiplexGraph& g) {
  CandidatePool pool;
  for (const auto& l : g.layers)
    pool.pairs.insert(pool.pairs.end(), l.edges().begin(), l.edges().end());
  std::sort(pool.pairs.begin(), pool.pairs.end());
  pool.pairs.erase(std::unique(pool.pairs.begin(), pool.pairs.end()),
                   pool.pairs.end());
  return pool;
}

/// Largest possible edge count of an l-layer multiplex over N nodes,
/// l * N * (N - 1) / 2. Overflow raises instead of wrapping.
inline int64_t max_edge_count(int64_t layer_count, int64_t node_count) {
  if (layer_count < 1 || node_count < 1)
    throw UsageError("max_edge_count requires l >= 1 and N >= 1");
  const unsigned __int128 wide = static_cast<unsigned __int128>(layer_count) *
                                 static_cast<unsigned __int128>(node_count) *
                                 static_cast<unsigned __int128>(node_count - 1) /
                                 2;
  if (wide > static_cast<unsigned __int128>(INT64_MAX))
    throw NumericError("max_edge_count overflows 64-bit range");
  return static_cast<int64_t>(wide);
}

struct LabeledExample {
  NodePair pair;
  int label = 0;  // 1 iff pair is an edge of the target layer
  int target_layer = -1;

  bool operator==(const LabeledExample&) const = default;
};

/// One example per pool pair, in pool order, labeled against `target`.
inline std::vector<LabeledExample> label_for_target(const CandidatePool& pool,
                                                    const MultiplexGraph& g,
                                                    int target) {
  if (target < 0 || target >= g.layer_count())
    throw UsageError("target layer " + std::to_string(target) +
                     " out of range [0, " + std::to_string(g.layer_count()) +
                     ")");
  const LayerGraph& tl = g.layers[static_cast<size_t>(target)];
  std::vector<LabeledExample> out;
  out.reserve(pool.size());
  for (const auto& p : pool.pairs)
    out.push_back({p, tl.has_edge(p.first, p.second) ? 1 : 0, target});
  return out;
}

/// Summary emitted by the prepare stage:
/// {nodes, layers: [{name, edges}], union_size}.
inline nlohmann::json graph_summary_json(const MultiplexGraph& g) {
  nlohmann::json layers = nlohmann::json::array();
  for (size_t m = 0; m < g.layers.size(); ++m)
    layers.push_back({{"name", g.layer_names[m]},
                      {"edges", g.layers[m].edge_count()}});
  return {{"nodes", g.node_count},
          {"layers", layers},
          {"union_size", build_union_pool(g).size()}};
}

// ---------------------------------------------------------------------------
// Binary graph file (prepare-stage artifact)
// ---------------------------------------------------------------------------

namespace detail {
constexpr char kGraphMagic[8] = {'M', 'X', 'L', 'G', 'R', 'F', '0', '1'};
}  // namespace detail

inline void write_graph_binary(const MultiplexGraph& g, std::ostream& out) {
  out.write(detail::kGraphMagic, sizeof(detail::kGraphMagic));
  detail::write_u32(out, static_cast<uint32_t>(g.node_count));
  detail::write_u32(out, static_cast<uint32_t>(g.layer_count()));
  for (const auto& s : g.node_labels) detail::write_str(out, s);
  for (const auto& s : g.layer_names) detail::write_str(out, s);
  for (const auto& l : g.layers) {
    detail::write_u32(out, static_cast<uint32_t>(l.edge_count()));
    for (const auto& [u, v] : l.edges()) {
      detail::write_u32(out, static_cast<uint32_t>(u));
      detail::write_u32(out, static_cast<uint32_t>(v));
    }
  }
}

inline MultiplexGraph read_graph_binary(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, detail::kGraphMagic))
    throw DataError("not a graph binary file (bad magic)");
  MultiplexGraph g;
  g.node_count = static_cast<NodeId>(detail::read_u32(in));
  const uint32_t layer_count = detail::read_u32(in);
  for (uint32_t i = 0; i < static_cast<uint32_t>(g.node_count); ++i)
    g.node_labels.push_back(detail::read_str(in));
  for (uint32_t m = 0; m < layer_count; ++m)
    g.layer_names.push_back(detail::read_str(in));
  for (uint32_t m = 0; m < layer_count; ++m) {
    const uint32_t n_edges = detail::read_u32(in);
    std::vector<NodePair> edges;
    edges.reserve(n_edges);
    for (uint32_t e = 0; e < n_edges; ++e) {
      const NodeId u = static_cast<NodeId>(detail::read_u32(in));
      const NodeId v = static_cast<NodeId>(detail::read_u32(in));
      edges.emplace_back(u, v);
    }
    g.layers.emplace_back(g.node_count, std::move(edges));
  }
  validate_graph(g);
  return g;
}

}  // namespace mxlink
