#include "hgsum/text_model.hpp"

#include "hgsum/errors.hpp"
#include "hgsum/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hgsum {

void TextModelConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must be a positive multiple of n_heads (" +
                      std::to_string(n_heads) + ")");
  }
  if (attention_window < 1) throw ConfigError("attention_window must be >= 1");
  if (n_layers_enc < 0 || n_layers_dec < 1) throw ConfigError("need n_layers_enc >= 0 and n_layers_dec >= 1");
  if (ffn_dim <= 0) throw ConfigError("ffn_dim must be positive");
  if (max_input_len < 16) throw ConfigError("max_input_len must be >= 16");
  if (max_out_len < 1) throw ConfigError("max_out_len must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

namespace {

std::string layer_name(const char* stack, Index l) { return std::string(stack) + ".l" + std::to_string(l); }

void add_linear(ShapePlan& plan, const std::string& name, Index in, Index out) {
  plan.push_back({name + ".w", in, out, Init::Xavier});
  plan.push_back({name + ".b", 1, out, Init::Zeros});
}

void add_norm(ShapePlan& plan, const std::string& name, Index d) {
  plan.push_back({name + ".g", 1, d, Init::Ones});
  plan.push_back({name + ".b", 1, d, Init::Zeros});
}

void add_attention(ShapePlan& plan, const std::string& name, Index d) {
  for (const char* p : {".q", ".k", ".v", ".o"}) add_linear(plan, name + p, d, d);
}

Value linear(const Value& x, const ModelParams& params, const std::string& name) {
  return ops::add(ops::matmul(x, params.at(name + ".w")), params.at(name + ".b"));
}

Value norm(const Value& x, const ModelParams& params, const std::string& name) {
  return ops::layer_norm(x, params.at(name + ".g"), params.at(name + ".b"));
}

Value drop(const Value& x, const TextModelConfig& cfg, ForwardContext ctx) {
  if (!ctx.training || cfg.dropout <= 0.0 || ctx.rng == nullptr) return x;
  return ops::dropout(x, cfg.dropout, *ctx.rng, true);
}

Value attention(const Value& xq, const Value& xkv, const ModelParams& params, const std::string& name, Index n_heads,
                const std::vector<std::uint8_t>* blocked, ForwardContext ctx) {
  const Value q = linear(xq, params, name + ".q");
  const Value k = linear(xkv, params, name + ".k");
  const Value v = linear(xkv, params, name + ".v");
  const Index dh = q.cols() / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Value> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  for (Index h = 0; h < n_heads; ++h) {
    Value qh = ops::slice(q, 1, h * dh, dh);
    Value kh = ops::slice(k, 1, h * dh, dh);
    Value vh = ops::slice(v, 1, h * dh, dh);
    Value scores = ops::scale(ops::matmul_nt(qh, kh), inv_sqrt);
    if (blocked) scores = ops::masked_fill(scores, *blocked, -1e9);
    Value probs = ops::softmax_rows(scores);
    if (ctx.trace) ctx.trace->weights.push_back(probs.data());
    heads.push_back(ops::matmul(probs, vh));
  }
  return linear(ops::concat(heads, 1), params, name + ".o");
}

Value feed_forward(const Value& x, const ModelParams& params, const std::string& name, const TextModelConfig& cfg,
                   ForwardContext ctx) {
  Value h = ops::relu(linear(x, params, name + ".w1"));
  return linear(drop(h, cfg, ctx), params, name + ".w2");
}

std::vector<std::uint8_t> causal_mask(Index n) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(n * n), 0);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) m[static_cast<std::size_t>(i * n + j)] = 1;
  return m;
}

std::vector<Index> iota(Index n) {
  std::vector<Index> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

}  // namespace

ShapePlan text_model_plan(const TextModelConfig& cfg, Index vocab_size) {
  cfg.validate();
  const Index d = cfg.d_model;
  ShapePlan plan;
  plan.push_back({"emb.tok", vocab_size, d, Init::Xavier});
  plan.push_back({"enc.pos", cfg.max_input_len, d, Init::Xavier});
  add_norm(plan, "enc.ln_emb", d);
  for (Index l = 0; l < cfg.n_layers_enc; ++l) {
    const std::string p = layer_name("enc", l);
    add_attention(plan, p + ".attn", d);
    add_norm(plan, p + ".ln1", d);
    add_linear(plan, p + ".ffn.w1", d, cfg.ffn_dim);
    add_linear(plan, p + ".ffn.w2", cfg.ffn_dim, d);
    add_norm(plan, p + ".ln2", d);
  }
  plan.push_back({"dec.pos", cfg.max_out_len + 1, d, Init::Xavier});
  plan.push_back({"dec.mem_pos", cfg.max_input_len, d, Init::Xavier});
  add_norm(plan, "dec.ln_emb", d);
  for (Index l = 0; l < cfg.n_layers_dec; ++l) {
    const std::string p = layer_name("dec", l);
    add_attention(plan, p + ".self", d);
    add_norm(plan, p + ".ln1", d);
    add_attention(plan, p + ".cross", d);
    add_norm(plan, p + ".ln2", d);
    add_linear(plan, p + ".ffn.w1", d, cfg.ffn_dim);
    add_linear(plan, p + ".ffn.w2", cfg.ffn_dim, d);
    add_norm(plan, p + ".ln3", d);
  }
  add_linear(plan, "dec.out", d, vocab_size);
  return plan;
}

std::vector<std::uint8_t> encoder_attention_mask(std::span<const Index> ids, Index window) {
  const Index n = static_cast<Index>(ids.size());
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(n * n), 0);
  auto global = [&](Index i) { return ids[static_cast<std::size_t>(i)] == kDocSep || ids[static_cast<std::size_t>(i)] == kSentSep; };
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      bool allowed = std::abs(i - j) <= window || global(i) || global(j);
      blocked[static_cast<std::size_t>(i * n + j)] = allowed ? 0 : 1;
    }
  }
  return blocked;
}

EncoderOutput encode_text(const EncoderInput& input, const ModelParams& params, const TextModelConfig& cfg,
                          ForwardContext ctx) {
  const Index n = static_cast<Index>(input.ids.size());
  if (n == 0) throw DataError("encode_text: empty input");
  if (n > cfg.max_input_len) {
    throw DataError("encode_text: input of " + std::to_string(n) + " tokens exceeds max_input_len " +
                    std::to_string(cfg.max_input_len));
  }
  const auto positions = iota(n);
  Value x = ops::add(ops::gather_rows(params.at("emb.tok"), input.ids), ops::gather_rows(params.at("enc.pos"), positions));
  x = drop(norm(x, params, "enc.ln_emb"), cfg, ctx);
  const auto blocked = encoder_attention_mask(input.ids, cfg.attention_window);
  for (Index l = 0; l < cfg.n_layers_enc; ++l) {
    const std::string p = layer_name("enc", l);
    Value a = attention(x, x, params, p + ".attn", cfg.n_heads, &blocked, ctx);
    x = norm(ops::add(x, drop(a, cfg, ctx)), params, p + ".ln1");
    Value f = feed_forward(x, params, p + ".ffn", cfg, ctx);
    x = norm(ops::add(x, drop(f, cfg, ctx)), params, p + ".ln2");
  }
  return EncoderOutput{x, input.boundaries};
}

Value unit_embeddings(const EncoderOutput& enc, const HeteroGraph& graph) {
  const BoundaryIndex& b = enc.boundaries;
  std::vector<Index> rows;
  rows.reserve(graph.nodes.size());
  auto sentence_boundary = [&](std::size_t doc, std::size_t sent) -> const SentenceBoundary* {
    for (const auto& sb : b.sentences) {
      if (sb.doc == doc && sb.sent == sent) return &sb;
    }
    return nullptr;
  };
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const GraphNode& n = graph.nodes[i];
    Index expected = -1;
    switch (n.kind) {
      case NodeKind::Document:
        if (n.doc && *n.doc < b.doc_sep.size()) expected = b.doc_sep[*n.doc];
        break;
      case NodeKind::Sentence:
        if (n.doc && n.sent) {
          if (const auto* sb = sentence_boundary(*n.doc, *n.sent)) expected = sb->sep_pos;
        }
        break;
      case NodeKind::Word:
        if (n.doc && n.sent && n.token) {
          const auto* sb = sentence_boundary(*n.doc, *n.sent);
          if (sb && static_cast<Index>(*n.token) < sb->token_end - sb->token_begin) {
            expected = sb->token_begin + static_cast<Index>(*n.token);
          }
        }
        break;
    }
    if (expected < 0 || expected != n.token_position || expected >= enc.q.rows()) {
      throw DataError("unit_embeddings: node " + std::to_string(i) + " of graph '" + graph.cluster_id +
                      "' is not aligned with the encoder boundaries");
    }
    rows.push_back(expected);
  }
  return ops::gather_rows(enc.q, rows);
}

Value decode_teacher_forced(const DecoderMemory& memory, std::span<const Index> target, const ModelParams& params,
                            const TextModelConfig& cfg, ForwardContext ctx) {
  const Index t = static_cast<Index>(target.size());
  if (t == 0) throw DataError("decode_teacher_forced: empty target");
  if (t > cfg.max_out_len + 1) throw DataError("decode_teacher_forced: target longer than max_out_len");
  if (memory.rows.rows() == 0 || static_cast<Index>(memory.positions.size()) != memory.rows.rows()) {
    throw DataError("decode_teacher_forced: memory rows and positions disagree");
  }
  for (Index p : memory.positions) {
    if (p < 0 || p >= cfg.max_input_len) throw DataError("decode_teacher_forced: memory position out of range");
  }
  Value mem = ops::add(memory.rows, ops::gather_rows(params.at("dec.mem_pos"), memory.positions));
  const auto positions = iota(t);
  Value x = ops::add(ops::gather_rows(params.at("emb.tok"), target), ops::gather_rows(params.at("dec.pos"), positions));
  x = drop(norm(x, params, "dec.ln_emb"), cfg, ctx);
  const auto blocked = causal_mask(t);
  for (Index l = 0; l < cfg.n_layers_dec; ++l) {
    const std::string p = layer_name("dec", l);
    Value a = attention(x, x, params, p + ".self", cfg.n_heads, &blocked, ctx);
    x = norm(ops::add(x, drop(a, cfg, ctx)), params, p + ".ln1");
    Value c = attention(x, mem, params, p + ".cross", cfg.n_heads, nullptr, ctx);
    x = norm(ops::add(x, drop(c, cfg, ctx)), params, p + ".ln2");
    Value f = feed_forward(x, params, p + ".ffn", cfg, ctx);
    x = norm(ops::add(x, drop(f, cfg, ctx)), params, p + ".ln3");
  }
  return linear(x, params, "dec.out");
}

namespace {

struct Hypothesis {
  std::vector<Index> tokens;
  double logp = 0.0;
};

double hyp_score(const Hypothesis& h, bool length_norm) {
  if (!length_norm || h.tokens.empty()) return h.logp;
  return h.logp / static_cast<double>(h.tokens.size());
}

}  // namespace

std::vector<Index> beam_search(const StepFn& step, Index bos, Index eos, Index beam_width, Index max_len,
                               bool length_norm) {
  if (beam_width < 1) throw ConfigError("beam width must be >= 1, got " + std::to_string(beam_width));
  if (max_len < 1) throw ConfigError("max decode length must be >= 1");
  std::vector<Hypothesis> alive(1);
  std::vector<Hypothesis> finished;
  for (Index len = 0; len < max_len && !alive.empty() && static_cast<Index>(finished.size()) < beam_width; ++len) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : alive) {
      std::vector<Index> prefix{bos};
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      Eigen::VectorXd lp = step(prefix);
      for (Index v = 0; v < lp.size(); ++v) {
        if (!std::isfinite(lp(v))) continue;
        Hypothesis c{h.tokens, h.logp + lp(v)};
        c.tokens.push_back(v);
        candidates.push_back(std::move(c));
      }
    }
    // Stable: equal scores keep parent order, then token order.
    std::stable_sort(candidates.begin(), candidates.end(), [length_norm](const Hypothesis& a, const Hypothesis& b) {
      return hyp_score(a, length_norm) > hyp_score(b, length_norm);
    });
    if (static_cast<Index>(candidates.size()) > beam_width) candidates.resize(static_cast<std::size_t>(beam_width));
    alive.clear();
    for (auto& c : candidates) {
      if (c.tokens.back() == eos)
        finished.push_back(std::move(c));
      else
        alive.push_back(std::move(c));
    }
  }
  std::vector<Hypothesis> pool = finished;
  pool.insert(pool.end(), alive.begin(), alive.end());
  if (pool.empty()) return {};
  auto best = std::max_element(pool.begin(), pool.end(), [length_norm](const Hypothesis& a, const Hypothesis& b) {
    return hyp_score(a, length_norm) < hyp_score(b, length_norm);
  });
  return best->tokens;
}

std::vector<Index> greedy_search(const StepFn& step, Index bos, Index eos, Index max_len) {
  std::vector<Index> prefix{bos};
  std::vector<Index> out;
  for (Index len = 0; len < max_len; ++len) {
    Eigen::VectorXd lp = step(prefix);
    Index best = -1;
    for (Index v = 0; v < lp.size(); ++v) {
      if (std::isfinite(lp(v)) && (best < 0 || lp(v) > lp(best))) best = v;
    }
    if (best < 0) break;
    out.push_back(best);
    prefix.push_back(best);
    if (best == eos) break;
  }
  return out;
}

StepFn decoder_step_fn(const DecoderMemory& memory, const ModelParams& params, const TextModelConfig& cfg) {
  return [&memory, &params, &cfg](std::span<const Index> prefix) {
    NoGradGuard guard;
    Value logits = decode_teacher_forced(memory, prefix, params, cfg);
    Value lp = ops::log_softmax_rows(ops::slice(logits, 0, logits.rows() - 1, 1));
    Eigen::VectorXd out = lp.data().row(0).transpose();
    for (Index banned : {kPad, kBos, kSentSep, kDocSep}) {
      if (banned < out.size()) out(banned) = -std::numeric_limits<double>::infinity();
    }
    return out;
  };
}

std::vector<Index> decode_beam(const DecoderMemory& memory, const ModelParams& params, const TextModelConfig& cfg,
                               Index beam_width, Index max_len) {
  if (memory.rows.rows() == 0) throw DataError("decode_beam: empty memory");
  max_len = std::min(max_len, cfg.max_out_len);
  return beam_search(decoder_step_fn(memory, params, cfg), kBos, kEos, beam_width, max_len, cfg.length_norm);
}

std::vector<Index> decode_greedy(const DecoderMemory& memory, const ModelParams& params, const TextModelConfig& cfg,
                                 Index max_len) {
  if (memory.rows.rows() == 0) throw DataError("decode_greedy: empty memory");
  max_len = std::min(max_len, cfg.max_out_len);
  return greedy_search(decoder_step_fn(memory, params, cfg), kBos, kEos, max_len);
}

}  // namespace hgsum
