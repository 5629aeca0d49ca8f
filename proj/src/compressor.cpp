#include "hgsum/compressor.hpp"

#include "hgsum/errors.hpp"
#include "hgsum/ops.hpp"

#include <algorithm>
#include <cmath>

namespace hgsum {

void CompressorConfig::validate() const {
  if (!(k > 0.0 && k <= 1.0)) throw ConfigError("compression ratio k must lie in (0, 1], got " + std::to_string(k));
}

ShapePlan compressor_plan(Index d) { return {{kScoreParam, 1, d, Init::Xavier}}; }

Value node_scores(const Value& q_graph, const Value& r) {
  return ops::softmax_rows(ops::transpose(ops::matmul_nt(q_graph, r)));
}

std::vector<Index> select_topk_sentences(const Matrix& t, double k, const HeteroGraph& g) {
  CompressorConfig{k, false}.validate();
  if (t.rows() != 1 || t.cols() != g.num_nodes()) throw DataError("select_topk_sentences: scores do not match the graph");
  std::vector<Index> sentences = g.nodes_of(NodeKind::Sentence);
  if (sentences.empty()) throw DataError("select_topk_sentences: graph '" + g.cluster_id + "' has no sentence nodes");
  const auto keep = static_cast<std::size_t>(
      std::max(1.0, std::ceil(k * static_cast<double>(sentences.size()) - 1e-9)));
  std::stable_sort(sentences.begin(), sentences.end(), [&](Index a, Index b) { return t(0, a) > t(0, b); });
  sentences.resize(std::min(keep, sentences.size()));
  std::sort(sentences.begin(), sentences.end());
  return sentences;
}

std::vector<Index> extend_selection(std::span<const Index> selected_sentences, const HeteroGraph& g) {
  if (selected_sentences.empty()) throw DataError("extend_selection: empty sentence selection");
  std::vector<std::uint8_t> keep(g.nodes.size(), 0);
  for (Index s : selected_sentences) {
    if (s < 0 || s >= g.num_nodes() || g.nodes[static_cast<std::size_t>(s)].kind != NodeKind::Sentence) {
      throw DataError("extend_selection: node " + std::to_string(s) + " is not a sentence node");
    }
    keep[static_cast<std::size_t>(s)] = 1;
    for (EdgeType t : {EdgeType::SW, EdgeType::DS}) {
      for (const Neighbor& nb : neighbors(g, s, t)) keep[static_cast<std::size_t>(nb.node)] = 1;
    }
  }
  std::vector<Index> out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

CompressedGraph compress(const Value& q_graph, const Value& t, std::span<const Index> nodes, const HeteroGraph& g,
                         const CompressorConfig& cfg) {
  if (nodes.empty()) throw DataError("compress: empty node selection");
  Value mask = ops::gather_rows(ops::transpose(t), nodes);
  if (cfg.renorm_mask) mask = ops::scale(ops::divide(mask, ops::sum(mask)), static_cast<double>(nodes.size()));
  CompressedGraph out;
  out.rows = ops::mul_col(ops::gather_rows(q_graph, nodes), mask);
  out.nodes.assign(nodes.begin(), nodes.end());
  for (Index n : nodes) out.positions.push_back(g.nodes[static_cast<std::size_t>(n)].token_position);
  return out;
}

CompressedGraph compress_graph(const Value& q_graph, const Value& r, const HeteroGraph& g, const CompressorConfig& cfg) {
  Value t = node_scores(q_graph, r);
  const auto sentences = select_topk_sentences(t.data(), cfg.k, g);
  const auto nodes = extend_selection(sentences, g);
  return compress(q_graph, t, nodes, g, cfg);
}

}  // namespace hgsum
