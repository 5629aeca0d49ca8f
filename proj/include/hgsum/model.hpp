#pragma once

#include "hgsum/compressor.hpp"
#include "hgsum/corpus.hpp"
#include "hgsum/embeddings.hpp"
#include "hgsum/hetgraph.hpp"
#include "hgsum/mgat.hpp"
#include "hgsum/params.hpp"
#include "hgsum/text_model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hgsum {

struct ModelConfig {
  TextModelConfig text;
  MgatConfig mgat;  // d_in follows text.d_model; type_erased follows !use_mgat
  CompressorConfig compressor;
  GraphConfig graph;
  bool use_mgat = true;
  bool use_compressor = true;

  // Copies the dependent fields into the sub-configs and validates them.
  void finalize();
  MgatConfig graph_encoder() const;
};

ShapePlan model_plan(const ModelConfig& cfg, Index vocab_size);

// Everything about one text that does not depend on parameters.
struct PreparedText {
  DocumentCluster text;  // after truncation to the input budget
  EncoderInput input;
  HeteroGraph graph;
  GraphChannels channels;
};

struct PreparedExample {
  std::string id;
  PreparedText source;
  std::optional<PreparedText> summary;  // G_z inputs, training only
  std::vector<Index> target;            // BOS, summary ids, EOS (empty without a summary)
  std::optional<std::vector<Sentence>> reference;
};

struct GraphResources {
  const Vocab* vocab = nullptr;
  const EmbeddingTable* table = nullptr;
  const SentenceEmbedder* embedder = nullptr;
};

PreparedText prepare_text(const DocumentCluster& cluster, const GraphResources& res, const ModelConfig& cfg);
// The summary side is prepared only when `with_summary` and the cluster has one.
PreparedExample prepare_example(const DocumentCluster& cluster, const GraphResources& res, const ModelConfig& cfg,
                                bool with_summary = true);

// Text encoder, unit alignment and graph encoder: Q' rows in graph node order.
Value encode_graph(const PreparedText& text, const ModelParams& params, const ModelConfig& cfg, ForwardContext ctx = {});

struct SourceEncoding {
  Value q_graph;                   // Q'_D
  DecoderMemory memory;            // Q_p and positions
  std::vector<Index> kept_nodes;   // I, or every node without the compressor
};

SourceEncoding encode_source(const PreparedText& source, const ModelParams& params, const ModelConfig& cfg,
                             ForwardContext ctx = {});

// Generated ids (no BOS, EOS kept if produced). beam_width 0 selects greedy.
std::vector<Index> summarize_ids(const PreparedExample& ex, const ModelParams& params, const ModelConfig& cfg,
                                 Index beam_width, Index max_len);

}  // namespace hgsum
