#include "hgsum/mgat.hpp"

#include "hgsum/errors.hpp"
#include "hgsum/ops.hpp"

#include <cmath>

namespace hgsum {

void MgatConfig::validate() const {
  if (n_layers < 0) throw ConfigError("mgat layers must be >= 0");
  if (n_heads < 1) throw ConfigError("mgat heads must be >= 1");
  if (d_in < 1 || d_head < 1) throw ConfigError("mgat dimensions must be positive");
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky slope must be >= 0");
}

std::string mgat_param_name(const MgatConfig& cfg, Index layer, Index channel, Index head, const char* leaf) {
  std::string name = cfg.type_erased ? "gat" : "mgat";
  name += ".l" + std::to_string(layer);
  if (!cfg.type_erased) name += ".c" + std::to_string(channel);
  name += ".h" + std::to_string(head) + "." + leaf;
  return name;
}

std::string mgat_u_name(const MgatConfig& cfg, Index layer) {
  return std::string(cfg.type_erased ? "gat" : "mgat") + ".l" + std::to_string(layer) + ".U";
}

ShapePlan mgat_plan(const MgatConfig& cfg) {
  cfg.validate();
  ShapePlan plan;
  const Index c_count = cfg.n_channels();
  for (Index l = 0; l < cfg.n_layers; ++l) {
    for (Index c = 0; c < c_count; ++c) {
      for (Index m = 0; m < cfg.n_heads; ++m) {
        plan.push_back({mgat_param_name(cfg, l, c, m, "W"), cfg.d_head, cfg.d_in, Init::Xavier});
        plan.push_back({mgat_param_name(cfg, l, c, m, "w"), 1, 2 * cfg.d_head, Init::Xavier});
      }
    }
    plan.push_back({mgat_u_name(cfg, l), cfg.d_in, c_count * cfg.n_heads * cfg.d_head, Init::Xavier});
  }
  return plan;
}

GraphChannels prepare_channels(const HeteroGraph& g, bool type_erased) {
  const Index n = g.num_nodes();
  GraphChannels out;
  out.num_nodes = n;
  auto build = [&](std::span<const EdgeType> types) {
    std::vector<Index> src, dst;
    std::vector<double> weight;
    for (Index i = 0; i < n; ++i) {
      src.push_back(i);
      dst.push_back(i);
      weight.push_back(1.0);
      for (EdgeType t : types) {
        for (const Neighbor& nb : g.adjacency[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) {
          src.push_back(nb.node);
          dst.push_back(i);
          weight.push_back(nb.weight);
        }
      }
    }
    ChannelEdges ch;
    ch.src = std::move(src);
    ch.dst = std::move(dst);
    ch.weight = Eigen::Map<const Matrix>(weight.data(), static_cast<Index>(weight.size()), 1);
    return ch;
  };
  if (type_erased) {
    out.channels.push_back(build(kEdgeTypes));
  } else {
    for (EdgeType t : kEdgeTypes) {
      const EdgeType one[] = {t};
      out.channels.push_back(build(one));
    }
  }
  return out;
}

double attention_coefficient(const Eigen::VectorXd& h_i, const Eigen::VectorXd& h_j, double e_ij, const Matrix& W,
                             const Eigen::VectorXd& w, double slope) {
  const Eigen::VectorXd wi = W * h_i;
  const Eigen::VectorXd wj = W * h_j;
  const Index dh = wi.size();
  const double z = e_ij * (w.head(dh).dot(wi) + w.tail(dh).dot(wj));
  return z >= 0.0 ? z : slope * z;
}

Value channel_attention(const Value& h, const ChannelEdges& ch, std::span<const Value> W, std::span<const Value> w,
                        double slope, std::vector<Matrix>* alphas) {
  if (W.size() != w.size() || W.empty()) throw NumericError("channel_attention: head parameter count mismatch");
  const Index n = h.rows();
  const Value weight(ch.weight);
  std::vector<Value> heads;
  for (std::size_t m = 0; m < W.size(); ++m) {
    const Index dh = W[m].rows();
    Value wh = ops::matmul_nt(h, W[m]);
    Value a_dst = ops::matmul_nt(wh, ops::slice(w[m], 1, 0, dh));
    Value a_src = ops::matmul_nt(wh, ops::slice(w[m], 1, dh, dh));
    Value z = ops::add(ops::gather_rows(a_dst, ch.dst), ops::gather_rows(a_src, ch.src));
    Value d = ops::leaky_relu(ops::mul(z, weight), slope);
    Value alpha = ops::segment_softmax(d, ch.dst, n);
    if (alphas) alphas->push_back(alpha.data());
    Value msg = ops::mul_col(ops::gather_rows(wh, ch.src), alpha);
    heads.push_back(ops::elu(ops::scatter_add_rows(msg, ch.dst, n)));
  }
  return heads.size() == 1 ? heads.front() : ops::concat(heads, 1);
}

Value mgat_layer(const Value& h, const GraphChannels& graph, const ModelParams& params, const MgatConfig& cfg,
                 Index layer, MgatTrace* trace) {
  if (static_cast<Index>(graph.channels.size()) != cfg.n_channels()) {
    throw DataError("mgat_layer: graph has " + std::to_string(graph.channels.size()) + " channels, model expects " +
                    std::to_string(cfg.n_channels()));
  }
  std::vector<Value> blocks;
  std::vector<std::vector<Matrix>> layer_alphas;
  for (Index c = 0; c < cfg.n_channels(); ++c) {
    std::vector<Value> W, w;
    for (Index m = 0; m < cfg.n_heads; ++m) {
      W.push_back(params.at(mgat_param_name(cfg, layer, c, m, "W")));
      w.push_back(params.at(mgat_param_name(cfg, layer, c, m, "w")));
    }
    std::vector<Matrix> alphas;
    blocks.push_back(channel_attention(h, graph.channels[static_cast<std::size_t>(c)], W, w, cfg.leaky_slope,
                                       trace ? &alphas : nullptr));
    if (trace) layer_alphas.push_back(std::move(alphas));
  }
  Value hcat = blocks.size() == 1 ? blocks.front() : ops::concat(blocks, 1);
  if (trace) {
    trace->alphas.push_back(std::move(layer_alphas));
    trace->concat.push_back(hcat.data());
  }
  return ops::matmul_nt(hcat, params.at(mgat_u_name(cfg, layer)));
}

Value mgat_encode(const Value& q, const GraphChannels& graph, const ModelParams& params, const MgatConfig& cfg,
                  MgatTrace* trace) {
  if (q.rows() != graph.num_nodes) {
    throw DataError("mgat_encode: " + std::to_string(q.rows()) + " embedding rows for a graph of " +
                    std::to_string(graph.num_nodes) + " nodes");
  }
  if (q.cols() != cfg.d_in) {
    throw DataError("mgat_encode: embedding width " + std::to_string(q.cols()) + " != d_in " + std::to_string(cfg.d_in));
  }
  Value h = q;
  for (Index l = 0; l < cfg.n_layers; ++l) {
    Value upd = mgat_layer(h, graph, params, cfg, l, trace);
    h = cfg.residual ? ops::add(h, upd) : upd;
  }
  return h;
}

}  // namespace hgsum
