#pragma once

#include "hgsum/model.hpp"
#include "hgsum/params.hpp"
#include "hgsum/rouge.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hgsum {

struct TrainConfig {
  double beta = 0.5;
  double label_smoothing = 0.1;
  double lr = 3e-4;
  Index epochs = 10;
  Index patience = 5;  // dev evaluations without improvement
  Index accum = 1;     // train steps per optimizer update
  Index max_steps = 0; // 0 = no cap
  std::uint64_t seed = 13;
  bool single_precision = false;
  Index dev_max_len = 64;

  void validate() const;
};

struct LossBreakdown {
  double l_ce = 0.0;
  double l_gs = 0.0;
  double total = 0.0;
};

struct LossGraph {
  Value l_ce;
  Value l_gs;
  Value total;
  LossBreakdown values() const;
};

Value cross_entropy_smoothed(const Value& logits, std::span<const Index> targets, double smoothing);

// -cosine(mean_rows(q_p), mean_rows(q_z)); 0 (and *degenerate = true) when a mean
// has zero norm.
Value graph_similarity_loss(const Value& q_p, const Value& q_z, bool* degenerate = nullptr);

// Builds the full recorded loss for one example with a summary.
LossGraph compute_losses(const PreparedExample& ex, const ModelParams& params, const ModelConfig& cfg,
                         const TrainConfig& tcfg, ForwardContext ctx = {});

// Forward plus backward; gradients accumulate into `params`. Throws
// NumericError with the loss components when the total is not finite.
LossBreakdown train_step(const PreparedExample& ex, ModelParams& params, const ModelConfig& cfg, const TrainConfig& tcfg,
                         std::mt19937_64* dropout_rng = nullptr);

struct RougeTriple {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
};

// F1 scores of generated ids against reference sentences, both re-split by the
// corpus sentence splitter.
RougeTriple score_summary(const std::vector<Sentence>& candidate, const std::vector<Sentence>& reference);
std::vector<Sentence> ids_to_sentences(std::span<const Index> ids, const Vocab& vocab);

struct StepRecord {
  Index step = 0;
  Index epoch = 0;
  LossBreakdown loss;
};

struct DevRecord {
  Index step = 0;
  Index epoch = 0;
  RougeTriple rouge;
};

struct FitResult {
  ModelParams best;
  std::vector<StepRecord> steps;
  std::vector<DevRecord> dev;
  double best_dev_rl = -1.0;
  Index steps_run = 0;
  bool early_stopped = false;
};

struct FitCallbacks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const DevRecord&)> on_dev;
};

// Mean greedy-decoding ROUGE over examples with references.
RougeTriple evaluate_greedy(const std::vector<PreparedExample>& examples, const ModelParams& params,
                            const ModelConfig& cfg, const Vocab& vocab, Index max_len);

// Seeded shuffled epochs of train_step with Adam. The best dev R-L parameters
// are kept; without a dev set the final parameters are returned.
FitResult fit(const std::vector<PreparedExample>& train, const std::vector<PreparedExample>& dev, ModelParams& params,
              const ModelConfig& cfg, const TrainConfig& tcfg, const Vocab& vocab, const FitCallbacks& callbacks = {});

}  // namespace hgsum
