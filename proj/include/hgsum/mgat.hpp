#pragma once

#include "hgsum/hetgraph.hpp"
#include "hgsum/params.hpp"
#include "hgsum/value.hpp"

#include <string>
#include <vector>

namespace hgsum {

inline constexpr Index kNumChannels = static_cast<Index>(kNumEdgeTypes);

struct MgatConfig {
  Index n_layers = 2;
  Index n_heads = 2;
  Index d_in = 128;
  Index d_head = 32;
  double leaky_slope = 0.2;
  bool residual = true;
  // Single channel over the union of all edge types (the plain-GAT ablation).
  bool type_erased = false;

  void validate() const;
  Index n_channels() const { return type_erased ? 1 : kNumChannels; }
};

// Parameter names: "mgat.l{l}.c{c}.h{m}.W" [d_head x d_in], "mgat.l{l}.c{c}.h{m}.w"
// [1 x 2 d_head], "mgat.l{l}.U" [d_in x C M d_head]. The type-erased variant uses
// "gat.l{l}.h{m}.W", "gat.l{l}.h{m}.w" and "gat.l{l}.U".
ShapePlan mgat_plan(const MgatConfig& cfg);
std::string mgat_param_name(const MgatConfig& cfg, Index layer, Index channel, Index head, const char* leaf);
std::string mgat_u_name(const MgatConfig& cfg, Index layer);

// Directed message list for one channel: row e sends from src[e] to dst[e].
// A self-loop of weight 1 is included for every node.
struct ChannelEdges {
  std::vector<Index> src;
  std::vector<Index> dst;
  Matrix weight;  // E x 1
};

struct GraphChannels {
  Index num_nodes = 0;
  std::vector<ChannelEdges> channels;
};

// One entry per edge type in channel order, or a single union channel (parallel
// edges of different types are kept) when `type_erased`.
GraphChannels prepare_channels(const HeteroGraph& g, bool type_erased = false);

// leaky_relu(e_ij * w . [W h_i || W h_j]) for receiving node i.
double attention_coefficient(const Eigen::VectorXd& h_i, const Eigen::VectorXd& h_j, double e_ij, const Matrix& W,
                             const Eigen::VectorXd& w, double slope);

struct MgatTrace {
  // alphas[l][c][m]: E x 1 attention weights aligned with that channel's edges.
  std::vector<std::vector<std::vector<Matrix>>> alphas;
  // Per layer, the concatenated channel outputs H before U.
  std::vector<Matrix> concat;
};

// Heads concatenated: elu(sum_j alpha_ij W h_j) per head, [N x M d_head].
Value channel_attention(const Value& h, const ChannelEdges& ch, std::span<const Value> W, std::span<const Value> w,
                        double slope, std::vector<Matrix>* alphas = nullptr);

// U applied to the channel concatenation; no residual here.
Value mgat_layer(const Value& h, const GraphChannels& graph, const ModelParams& params, const MgatConfig& cfg,
                 Index layer, MgatTrace* trace = nullptr);

// Stacked layers, h <- h + layer(h) when cfg.residual. Throws DataError when
// q has a different number of rows than the graph has nodes.
Value mgat_encode(const Value& q, const GraphChannels& graph, const ModelParams& params, const MgatConfig& cfg,
                  MgatTrace* trace = nullptr);

}  // namespace hgsum
