#include "hgsum/training.hpp"

#include "hgsum/errors.hpp"
#include "hgsum/ops.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace hgsum {

void TrainConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ConfigError("label smoothing must lie in [0, 1)");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  if (accum < 1) throw ConfigError("accum must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (dev_max_len < 1) throw ConfigError("dev_max_len must be >= 1");
}

LossBreakdown LossGraph::values() const { return {l_ce.item(), l_gs.item(), total.item()}; }

Value cross_entropy_smoothed(const Value& logits, std::span<const Index> targets, double smoothing) {
  return ops::cross_entropy_smoothed(logits, targets, smoothing, kPad);
}

Value graph_similarity_loss(const Value& q_p, const Value& q_z, bool* degenerate) {
  if (q_p.rows() == 0 || q_z.rows() == 0) throw DataError("graph_similarity_loss: empty embedding set");
  Value mp = ops::mean(q_p, 0);
  Value mz = ops::mean(q_z, 0);
  const bool zero = mp.data().norm() < 1e-12 || mz.data().norm() < 1e-12;
  if (degenerate) *degenerate = zero;
  return ops::scale(ops::cosine(mp, mz), -1.0);
}

LossGraph compute_losses(const PreparedExample& ex, const ModelParams& params, const ModelConfig& cfg,
                         const TrainConfig& tcfg, ForwardContext ctx) {
  if (!ex.summary || ex.target.size() < 2) throw DataError("cluster '" + ex.id + "' has no summary to train on");
  SourceEncoding src = encode_source(ex.source, params, cfg, ctx);
  const std::span<const Index> target(ex.target);
  Value logits = decode_teacher_forced(src.memory, target.first(target.size() - 1), params, cfg.text, ctx);
  LossGraph out;
  out.l_ce = cross_entropy_smoothed(logits, target.subspan(1), tcfg.label_smoothing);
  Value q_z = encode_graph(*ex.summary, params, cfg, ctx);
  bool degenerate = false;
  out.l_gs = graph_similarity_loss(src.memory.rows, q_z, &degenerate);
  if (degenerate) std::cerr << "warning: zero-norm mean embedding in graph similarity loss for '" << ex.id << "'\n";
  out.total = ops::add(ops::scale(out.l_ce, tcfg.beta), ops::scale(out.l_gs, 1.0 - tcfg.beta));
  return out;
}

LossBreakdown train_step(const PreparedExample& ex, ModelParams& params, const ModelConfig& cfg, const TrainConfig& tcfg,
                         std::mt19937_64* dropout_rng) {
  ForwardContext ctx;
  ctx.training = dropout_rng != nullptr;
  ctx.rng = dropout_rng;
  LossGraph losses = compute_losses(ex, params, cfg, tcfg, ctx);
  LossBreakdown values = losses.values();
  if (!std::isfinite(values.total) || !std::isfinite(values.l_ce) || !std::isfinite(values.l_gs)) {
    std::ostringstream msg;
    msg << "non-finite loss on cluster '" << ex.id << "': l_ce=" << values.l_ce << " l_gs=" << values.l_gs
        << " total=" << values.total;
    throw NumericError(msg.str());
  }
  losses.total.backward();
  return values;
}

std::vector<Sentence> ids_to_sentences(std::span<const Index> ids, const Vocab& vocab) {
  return tokenize(detokenize(ids, vocab));
}

RougeTriple score_summary(const std::vector<Sentence>& candidate, const std::vector<Sentence>& reference) {
  const auto cand = rouge_sentences(candidate);
  const auto ref = rouge_sentences(reference);
  const TokenList cf = flatten(cand);
  const TokenList rf = flatten(ref);
  return {rouge_n(cf, rf, 1).f1, rouge_n(cf, rf, 2).f1, rouge_l_summary(cand, ref).f1};
}

RougeTriple evaluate_greedy(const std::vector<PreparedExample>& examples, const ModelParams& params,
                            const ModelConfig& cfg, const Vocab& vocab, Index max_len) {
  RougeTriple mean;
  std::size_t n = 0;
  for (const auto& ex : examples) {
    if (!ex.reference) continue;
    const auto ids = summarize_ids(ex, params, cfg, 0, max_len);
    const RougeTriple r = score_summary(ids_to_sentences(ids, vocab), *ex.reference);
    mean.r1 += r.r1;
    mean.r2 += r.r2;
    mean.rl += r.rl;
    ++n;
  }
  if (n > 0) {
    mean.r1 /= static_cast<double>(n);
    mean.r2 /= static_cast<double>(n);
    mean.rl /= static_cast<double>(n);
  }
  return mean;
}

FitResult fit(const std::vector<PreparedExample>& train, const std::vector<PreparedExample>& dev, ModelParams& params,
              const ModelConfig& cfg, const TrainConfig& tcfg, const Vocab& vocab, const FitCallbacks& callbacks) {
  tcfg.validate();
  if (train.empty()) throw DataError("fit: empty training set");
  FitResult result;
  result.best = params.clone();
  Adam adam(AdamConfig{tcfg.lr});
  std::mt19937_64 order_rng(tcfg.seed);
  std::mt19937_64 dropout_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  params.zero_grad();
  Index pending = 0;
  Index without_gain = 0;
  auto apply_update = [&] {
    if (pending == 0) return;
    adam.step(params, 1.0 / static_cast<double>(pending));
    params.zero_grad();
    if (tcfg.single_precision) round_to_single(params);
    pending = 0;
  };

  bool stop = false;
  for (Index epoch = 0; epoch < tcfg.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t idx : order) {
      StepRecord rec;
      rec.step = result.steps_run + 1;
      rec.epoch = epoch;
      rec.loss = train_step(train[idx], params, cfg, tcfg, cfg.text.dropout > 0.0 ? &dropout_rng : nullptr);
      ++result.steps_run;
      ++pending;
      if (pending == tcfg.accum) apply_update();
      result.steps.push_back(rec);
      if (callbacks.on_step) callbacks.on_step(rec);
      if (tcfg.max_steps > 0 && result.steps_run >= tcfg.max_steps) {
        stop = true;
        break;
      }
    }
    apply_update();
    if (dev.empty()) continue;
    DevRecord d;
    d.step = result.steps_run;
    d.epoch = epoch;
    d.rouge = evaluate_greedy(dev, params, cfg, vocab, tcfg.dev_max_len);
    result.dev.push_back(d);
    if (callbacks.on_dev) callbacks.on_dev(d);
    if (d.rouge.rl > result.best_dev_rl) {
      result.best_dev_rl = d.rouge.rl;
      result.best = params.clone();
      without_gain = 0;
    } else if (++without_gain >= tcfg.patience && tcfg.patience > 0) {
      result.early_stopped = true;
      stop = true;
    }
  }
  if (dev.empty()) result.best = params.clone();
  return result;
}

}  // namespace hgsum
