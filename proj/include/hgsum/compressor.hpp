#pragma once

#include "hgsum/hetgraph.hpp"
#include "hgsum/params.hpp"
#include "hgsum/value.hpp"

#include <span>
#include <vector>

namespace hgsum {

struct CompressorConfig {
  double k = 0.5;  // fraction of sentence nodes kept, in (0, 1]
  // Rescale retained scores to mean 1 inside the selection.
  bool renorm_mask = false;

  void validate() const;
};

inline constexpr const char* kScoreParam = "cmp.r";

// A single [1 x d] score projection.
ShapePlan compressor_plan(Index d);

// softmax over all nodes of q'_i . r, returned as a [1 x N] row.
Value node_scores(const Value& q_graph, const Value& r);

// ceil(k |V_s|) sentence node ids with the highest scores, ties to the lower
// id, returned ascending. Throws DataError when the graph has no sentences.
std::vector<Index> select_topk_sentences(const Matrix& t, double k, const HeteroGraph& g);

// Adds the word nodes (SW) and document nodes (DS) linked to the selected
// sentences; ascending node order.
std::vector<Index> extend_selection(std::span<const Index> selected_sentences, const HeteroGraph& g);

struct CompressedGraph {
  Value rows;                    // [|I| x d], row i = q'_{I_i} * mask_i
  std::vector<Index> nodes;      // I
  std::vector<Index> positions;  // token position of each retained node
};

CompressedGraph compress(const Value& q_graph, const Value& t, std::span<const Index> nodes, const HeteroGraph& g,
                         const CompressorConfig& cfg);

// Scores, selection, closure and masking in one call.
CompressedGraph compress_graph(const Value& q_graph, const Value& r, const HeteroGraph& g, const CompressorConfig& cfg);

}  // namespace hgsum
