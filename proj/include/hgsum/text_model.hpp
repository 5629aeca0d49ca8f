#pragma once

#include "hgsum/corpus.hpp"
#include "hgsum/hetgraph.hpp"
#include "hgsum/params.hpp"
#include "hgsum/value.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace hgsum {

struct TextModelConfig {
  Index d_model = 128;
  Index n_layers_enc = 2;
  Index n_layers_dec = 2;
  Index n_heads = 4;
  Index ffn_dim = 512;
  Index attention_window = 16;  // local radius
  Index max_input_len = 4096;
  Index max_out_len = 512;
  double dropout = 0.1;
  bool length_norm = true;

  // Throws ConfigError on inconsistent settings.
  void validate() const;
};

// Attention probabilities captured during a forward pass, one matrix per
// (layer, head) in execution order.
struct AttentionTrace {
  std::vector<Matrix> weights;
};

struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
  AttentionTrace* trace = nullptr;
};

ShapePlan text_model_plan(const TextModelConfig& cfg, Index vocab_size);

// blocked(i, j) = 1 when position i may not attend to position j: outside
// +-window unless either side is a DOC_SEP/SENT_SEP position.
std::vector<std::uint8_t> encoder_attention_mask(std::span<const Index> ids, Index window);

struct EncoderOutput {
  Value q;  // [n x d_model]
  BoundaryIndex boundaries;
};

EncoderOutput encode_text(const EncoderInput& input, const ModelParams& params, const TextModelConfig& cfg,
                          ForwardContext ctx = {});

// Word node <- its token row, sentence node <- its SENT_SEP row, document node
// <- its DOC_SEP row. Throws DataError when the graph and boundaries disagree.
Value unit_embeddings(const EncoderOutput& enc, const HeteroGraph& graph);

struct DecoderMemory {
  Value rows;                    // [m x d_model]
  std::vector<Index> positions;  // original token position per row
};

// Logits [|target| x V]; row i conditions on target[0..i].
Value decode_teacher_forced(const DecoderMemory& memory, std::span<const Index> target, const ModelParams& params,
                            const TextModelConfig& cfg, ForwardContext ctx = {});

// Log-probabilities over the vocabulary for the token following `prefix`
// (prefix starts with BOS).
using StepFn = std::function<Eigen::VectorXd(std::span<const Index> prefix)>;

// Returns generated tokens without BOS; EOS is kept when produced. Scores are
// cumulative log-probabilities, divided by length when `length_norm` is set.
std::vector<Index> beam_search(const StepFn& step, Index bos, Index eos, Index beam_width, Index max_len,
                               bool length_norm);
std::vector<Index> greedy_search(const StepFn& step, Index bos, Index eos, Index max_len);

StepFn decoder_step_fn(const DecoderMemory& memory, const ModelParams& params, const TextModelConfig& cfg);

std::vector<Index> decode_beam(const DecoderMemory& memory, const ModelParams& params, const TextModelConfig& cfg,
                               Index beam_width, Index max_len);
std::vector<Index> decode_greedy(const DecoderMemory& memory, const ModelParams& params, const TextModelConfig& cfg,
                                 Index max_len);

}  // namespace hgsum
