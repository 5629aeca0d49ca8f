#pragma once

#include "hgsum/corpus.hpp"
#include "hgsum/embeddings.hpp"

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hgsum {

enum class NodeKind { Document, Sentence, Word };

// Channel order used everywhere (MGAT blocks, exports): WE, WO, SS, DD, DS, SW.
enum class EdgeType { WE = 0, WO = 1, SS = 2, DD = 3, DS = 4, SW = 5 };
inline constexpr std::size_t kNumEdgeTypes = 6;
inline constexpr std::array<EdgeType, kNumEdgeTypes> kEdgeTypes = {EdgeType::WE, EdgeType::WO, EdgeType::SS,
                                                                   EdgeType::DD, EdgeType::DS, EdgeType::SW};
std::string_view edge_type_name(EdgeType t);
std::string_view node_kind_name(NodeKind k);

struct GraphNode {
  NodeKind kind = NodeKind::Word;
  Index index = 0;  // ordinal within its kind
  // Document has only doc; Sentence has doc and sent; Word has all three.
  std::optional<std::size_t> doc, sent, token;
  Index token_position = 0;  // position in the serialized encoder input
};

struct Neighbor {
  Index node = 0;
  double weight = 0.0;
};

struct Edge {
  Index a = 0;
  Index b = 0;
  double weight = 0.0;
};

// Nodes are ordered documents, then sentences, then word occurrences. Node ids
// are positions in `nodes`.
struct HeteroGraph {
  std::string cluster_id;
  std::vector<GraphNode> nodes;
  // adjacency[type][node], both directions stored, sorted by neighbor id.
  std::array<std::vector<std::vector<Neighbor>>, kNumEdgeTypes> adjacency;

  Index num_nodes() const { return static_cast<Index>(nodes.size()); }
  std::size_t count(NodeKind kind) const;
  std::vector<Index> nodes_of(NodeKind kind) const;
  // Undirected edges with a < b, sorted.
  std::vector<Edge> edges(EdgeType t) const;
  std::size_t edge_count(EdgeType t) const;
};

struct GraphConfig {
  // Noun pairs need static-vector cosine >= we_threshold; 0 disables the threshold.
  double we_threshold = 0.5;
  std::optional<double> ss_threshold;
  // Read NOUN/PROPN from per-token annotations instead of the stopword heuristic.
  bool external_pos = false;
};

// Token indices that may carry WE edges.
std::set<std::size_t> noun_candidates(const Sentence& sentence, bool external_pos = false);
bool is_stopword(std::string_view token);
std::size_t stopword_count();
std::span<const std::string_view> stopword_list();

// Adds a symmetric edge; self-edges are ignored.
void add_edge(HeteroGraph& g, EdgeType t, Index a, Index b, double weight);

HeteroGraph build_hetero_graph(const DocumentCluster& text, const EmbeddingTable& table, const SentenceEmbedder& embedder,
                               const GraphConfig& cfg);

// Sorted by neighbor id. Throws DataError for an unknown node.
const std::vector<Neighbor>& neighbors(const HeteroGraph& g, Index node, EdgeType t);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_graph(const HeteroGraph& g);

std::string to_dot(const HeteroGraph& g);
std::string to_json(const HeteroGraph& g);

}  // namespace hgsum
