#include "hgsum/model.hpp"

#include "hgsum/errors.hpp"

namespace hgsum {

void ModelConfig::finalize() {
  text.validate();
  mgat.d_in = text.d_model;
  mgat.type_erased = !use_mgat;
  mgat.validate();
  compressor.validate();
}

MgatConfig ModelConfig::graph_encoder() const {
  MgatConfig m = mgat;
  m.d_in = text.d_model;
  m.type_erased = !use_mgat;
  return m;
}

ShapePlan model_plan(const ModelConfig& cfg, Index vocab_size) {
  ShapePlan plan = text_model_plan(cfg.text, vocab_size);
  for (auto& spec : mgat_plan(cfg.graph_encoder())) plan.push_back(spec);
  if (cfg.use_compressor) {
    for (auto& spec : compressor_plan(cfg.text.d_model)) plan.push_back(spec);
  }
  return plan;
}

PreparedText prepare_text(const DocumentCluster& cluster, const GraphResources& res, const ModelConfig& cfg) {
  if (!res.vocab || !res.table || !res.embedder) throw ConfigError("prepare_text: missing vocabulary or embeddings");
  PreparedText out;
  const auto budget = static_cast<std::size_t>(cfg.text.max_input_len);
  out.text = truncate_to_budget(cluster, budget);
  out.input = serialize_encoder_input(out.text, *res.vocab, budget);
  out.graph = build_hetero_graph(out.text, *res.table, *res.embedder, cfg.graph);
  out.channels = prepare_channels(out.graph, !cfg.use_mgat);
  return out;
}

PreparedExample prepare_example(const DocumentCluster& cluster, const GraphResources& res, const ModelConfig& cfg,
                                bool with_summary) {
  PreparedExample ex;
  ex.id = cluster.id;
  ex.source = prepare_text(cluster, res, cfg);
  if (with_summary && cluster.summary && !cluster.summary->empty()) {
    ex.summary = prepare_text(summary_as_cluster(cluster), res, cfg);
    ex.target.push_back(kBos);
    for (Index id : encode_tokens(*cluster.summary, *res.vocab)) ex.target.push_back(id);
    ex.target.push_back(kEos);
    const auto cap = static_cast<std::size_t>(cfg.text.max_out_len + 1);
    if (ex.target.size() > cap) {
      ex.target.resize(cap);
      ex.target.back() = kEos;
    }
    ex.reference = cluster.summary;
  }
  return ex;
}

Value encode_graph(const PreparedText& text, const ModelParams& params, const ModelConfig& cfg, ForwardContext ctx) {
  EncoderOutput enc = encode_text(text.input, params, cfg.text, ctx);
  Value units = unit_embeddings(enc, text.graph);
  return mgat_encode(units, text.channels, params, cfg.graph_encoder());
}

SourceEncoding encode_source(const PreparedText& source, const ModelParams& params, const ModelConfig& cfg,
                             ForwardContext ctx) {
  SourceEncoding out;
  out.q_graph = encode_graph(source, params, cfg, ctx);
  if (cfg.use_compressor) {
    CompressedGraph c = compress_graph(out.q_graph, params.at(kScoreParam), source.graph, cfg.compressor);
    out.memory = DecoderMemory{c.rows, c.positions};
    out.kept_nodes = std::move(c.nodes);
  } else {
    out.memory.rows = out.q_graph;
    for (Index i = 0; i < source.graph.num_nodes(); ++i) {
      out.kept_nodes.push_back(i);
      out.memory.positions.push_back(source.graph.nodes[static_cast<std::size_t>(i)].token_position);
    }
  }
  return out;
}

std::vector<Index> summarize_ids(const PreparedExample& ex, const ModelParams& params, const ModelConfig& cfg,
                                 Index beam_width, Index max_len) {
  NoGradGuard guard;
  SourceEncoding enc = encode_source(ex.source, params, cfg);
  if (beam_width == 0) return decode_greedy(enc.memory, params, cfg.text, max_len);
  return decode_beam(enc.memory, params, cfg.text, beam_width, max_len);
}

}  // namespace hgsum
