#include "hgsum/cli.hpp"

#include "hgsum/errors.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace hgsum {

namespace fs = std::filesystem;

namespace {

struct Resources {
  Vocab vocab;
  EmbeddingTable table;
  std::unique_ptr<SentenceEmbedder> embedder;

  GraphResources view() const { return {&vocab, &table, embedder.get()}; }
};

std::size_t infer_dimension(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path + "'");
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string word;
    std::size_t n = 0;
    while (fields >> word) ++n;
    if (n >= 2) return n - 1;
  }
  throw DataError(path + ": no vectors found");
}

void load_embeddings(const RunConfig& cfg, Resources& res) {
  if (cfg.embeddings.empty()) throw ConfigError("--embeddings is required");
  res.table = load_static_embeddings(cfg.embeddings, static_cast<std::size_t>(cfg.embedding_dim));
  if (cfg.sentence_embeddings.empty()) {
    res.embedder = std::make_unique<SentenceEmbedder>(res.table);
  } else {
    EmbeddingTable pre =
        load_static_embeddings(cfg.sentence_embeddings, infer_dimension(cfg.sentence_embeddings));
    res.embedder = std::make_unique<SentenceEmbedder>(res.table, std::move(pre));
  }
}

std::vector<DocumentCluster> load_required(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  return load_clusters(path);
}

std::vector<PreparedExample> prepare_all(const std::vector<DocumentCluster>& clusters, const Resources& res,
                                         const ModelConfig& mcfg, bool with_summary) {
  std::vector<PreparedExample> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(prepare_example(c, res.view(), mcfg, with_summary));
  return out;
}

fs::path ensure_out_dir(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw DataError("cannot create output directory '" + cfg.out + "': " + ec.message());
  return fs::path(cfg.out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw DataError("failed writing '" + path.string() + "'");
}

std::string echo_config(const RunConfig& cfg, const fs::path& dir) {
  const fs::path p = dir / "config.json";
  write_text(p, to_json(cfg).dump(2) + "\n");
  return p.string();
}

std::string checkpoint_metadata(const RunConfig& cfg, const Vocab& vocab) {
  nlohmann::json meta;
  meta["config"] = to_json(cfg);
  std::vector<std::string> tokens(vocab.tokens().begin() + kNumReserved, vocab.tokens().end());
  meta["vocab"] = tokens;
  return meta.dump();
}

Vocab vocab_from_checkpoint(const std::string& path) {
  CheckpointData data = read_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(data.metadata);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": unreadable checkpoint metadata: " + e.what());
  }
  if (!meta.contains("vocab") || !meta["vocab"].is_array()) throw DataError(path + ": checkpoint has no vocabulary");
  return Vocab(meta["vocab"].get<std::vector<std::string>>());
}

ModelParams load_model(const RunConfig& cfg, const ModelConfig& mcfg, const Vocab& vocab) {
  ModelParams params = init_params(model_plan(mcfg, vocab.size()), cfg.seed);
  load_checkpoint(cfg.checkpoint, params);
  return params;
}

std::size_t summary_length(const std::string& text) {
  std::size_t n = 0;
  for (const auto& s : tokenize(text)) n += s.tokens.size();
  return n;
}

std::string fmt2(double x) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << x;
  return o.str();
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "cluster" : out;
}

struct Trained {
  ModelParams params;
  FitResult fit;
};

Trained train_model(const RunConfig& cfg, const ModelConfig& mcfg, const Resources& res,
                    const std::vector<PreparedExample>& train, const std::vector<PreparedExample>& dev,
                    const FitCallbacks& callbacks) {
  const TrainConfig tcfg = cfg.train_config();
  ModelParams params = init_params(model_plan(mcfg, res.vocab.size()), cfg.seed);
  if (tcfg.single_precision) round_to_single(params);
  FitResult result = fit(train, dev, params, mcfg, tcfg, res.vocab, callbacks);
  ModelParams best = result.best.clone();
  return {std::move(best), std::move(result)};
}

std::vector<std::string> generate(const std::vector<PreparedExample>& examples, const ModelParams& params,
                                  const ModelConfig& mcfg, const Vocab& vocab, Index beam_width) {
  std::vector<std::string> out;
  for (const auto& ex : examples) {
    const auto ids = summarize_ids(ex, params, mcfg, beam_width, mcfg.text.max_out_len);
    out.push_back(detokenize(ids, vocab));
  }
  return out;
}

}  // namespace

TrainArtifacts cmd_train(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const ModelConfig mcfg = cfg.model_config();
  const fs::path dir = ensure_out_dir(cfg);
  const auto train_clusters = load_required(cfg.data, "--data");
  if (train_clusters.empty()) throw DataError(cfg.data + ": no training clusters");
  const auto dev_clusters = cfg.dev.empty() ? std::vector<DocumentCluster>{} : load_clusters(cfg.dev);
  Resources res;
  res.vocab = build_vocab(train_clusters, static_cast<std::size_t>(cfg.min_freq));
  load_embeddings(cfg, res);
  const auto train = prepare_all(train_clusters, res, mcfg, true);
  const auto dev = prepare_all(dev_clusters, res, mcfg, true);

  TrainArtifacts art;
  art.config = echo_config(cfg, dir);
  art.metrics = (dir / "metrics.jsonl").string();
  std::ofstream metrics(art.metrics);
  if (!metrics) throw DataError("cannot write '" + art.metrics + "'");
  metrics << std::setprecision(17);
  FitCallbacks cb;
  cb.on_step = [&](const StepRecord& r) {
    nlohmann::json j{{"type", "step"}, {"step", r.step}, {"epoch", r.epoch},
                     {"l_ce", r.loss.l_ce}, {"l_gs", r.loss.l_gs}, {"total", r.loss.total}};
    metrics << j.dump() << '\n';
  };
  cb.on_dev = [&](const DevRecord& d) {
    nlohmann::json j{{"type", "dev"}, {"step", d.step}, {"epoch", d.epoch},
                     {"r1", d.rouge.r1}, {"r2", d.rouge.r2}, {"rl", d.rouge.rl}};
    metrics << j.dump() << '\n';
    out << "epoch " << d.epoch << " dev R-1 " << fmt2(100 * d.rouge.r1) << " R-2 " << fmt2(100 * d.rouge.r2) << " R-L "
        << fmt2(100 * d.rouge.rl) << '\n';
  };
  Trained t = train_model(cfg, mcfg, res, train, dev, cb);
  metrics.flush();
  art.checkpoint = (dir / "checkpoint.bin").string();
  save_checkpoint(art.checkpoint, t.params, checkpoint_metadata(cfg, res.vocab), cfg.single_precision());
  out << "trained " << t.fit.steps_run << " steps on " << train.size() << " clusters; parameters "
      << t.params.scalar_count() << "\n";
  if (!t.fit.steps.empty()) {
    const auto& last = t.fit.steps.back().loss;
    out << "last step l_ce " << last.l_ce << " l_gs " << last.l_gs << " total " << last.total << '\n';
  }
  out << "wrote " << art.checkpoint << '\n';
  return art;
}

std::vector<SummaryRecord> cmd_summarize(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (cfg.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const ModelConfig mcfg = cfg.model_config();
  const auto clusters = load_required(cfg.data, "--data");
  Resources res;
  res.vocab = vocab_from_checkpoint(cfg.checkpoint);
  load_embeddings(cfg, res);
  const ModelParams params = load_model(cfg, mcfg, res.vocab);
  const auto examples = prepare_all(clusters, res, mcfg, false);
  const auto texts = generate(examples, params, mcfg, res.vocab, cfg.beam_width);
  std::vector<SummaryRecord> records;
  std::string lines;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    records.push_back({examples[i].id, texts[i]});
    lines += nlohmann::json{{"id", examples[i].id}, {"summary", texts[i]}}.dump() + "\n";
  }
  if (!cfg.out.empty()) {
    const fs::path dir = ensure_out_dir(cfg);
    echo_config(cfg, dir);
    write_text(dir / "summaries.jsonl", lines);
  } else {
    out << lines;
  }
  return records;
}

EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out) {
  if (cfg.generated.empty()) throw ConfigError("--generated is required");
  const auto refs = load_required(cfg.references, "--references");
  std::map<std::string, std::string> generated;
  {
    std::ifstream in(cfg.generated);
    if (!in) throw DataError("cannot open '" + cfg.generated + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw DataError(cfg.generated + ": line " + std::to_string(line_no) + ": " + e.what());
      }
      if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("summary") ||
          !j["summary"].is_string()) {
        throw DataError(cfg.generated + ": line " + std::to_string(line_no) + ": expected {\"id\", \"summary\"}");
      }
      generated[j["id"].get<std::string>()] = j["summary"].get<std::string>();
    }
  }
  std::set<std::string> ref_ids;
  std::vector<std::string> missing_generated;
  for (const auto& c : refs) {
    ref_ids.insert(c.id);
    if (!c.summary) throw DataError(cfg.references + ": cluster '" + c.id + "' has no reference summary");
    if (!generated.count(c.id)) missing_generated.push_back(c.id);
  }
  std::vector<std::string> missing_refs;
  for (const auto& [id, text] : generated) {
    if (!ref_ids.count(id)) missing_refs.push_back(id);
  }
  if (!missing_generated.empty() || !missing_refs.empty()) {
    std::string msg = "id mismatch between generated and reference files;";
    if (!missing_generated.empty()) {
      msg += " missing from generated:";
      for (const auto& id : missing_generated) msg += " " + id;
      msg += ";";
    }
    if (!missing_refs.empty()) {
      msg += " missing from references:";
      for (const auto& id : missing_refs) msg += " " + id;
    }
    throw DataError(msg);
  }
  EvalReport report;
  for (const auto& c : refs) {
    const std::string& text = generated.at(c.id);
    const RougeTriple r = score_summary(tokenize(text), *c.summary);
    report.mean.r1 += r.r1;
    report.mean.r2 += r.r2;
    report.mean.rl += r.rl;
    report.mean_length += static_cast<double>(summary_length(text));
    ++report.clusters;
  }
  if (report.clusters > 0) {
    const double n = static_cast<double>(report.clusters);
    report.mean.r1 /= n;
    report.mean.r2 /= n;
    report.mean.rl /= n;
    report.mean_length /= n;
  }
  out << "R-1 " << fmt2(100 * report.mean.r1) << "  R-2 " << fmt2(100 * report.mean.r2) << "  R-L "
      << fmt2(100 * report.mean.rl) << "  mean length " << fmt2(report.mean_length) << "  clusters "
      << report.clusters << '\n';
  nlohmann::json j{{"r1", report.mean.r1},
                   {"r2", report.mean.r2},
                   {"rl", report.mean.rl},
                   {"mean_length", report.mean_length},
                   {"clusters", report.clusters}};
  if (!cfg.out.empty()) {
    const fs::path dir = ensure_out_dir(cfg);
    echo_config(cfg, dir);
    write_text(dir / "eval.json", j.dump(2) + "\n");
  }
  out << j.dump() << '\n';
  return report;
}

std::vector<KSweepRow> cmd_ksweep(const RunConfig& cfg, std::ostream& out) {
  if (cfg.k_values.size() < 2) throw ConfigError("ksweep needs at least two --k-values");
  if (cfg.no_compressor) throw ConfigError("ksweep requires the graph compressor");
  for (double k : cfg.k_values) CompressorConfig{k, false}.validate();
  cfg.validate();
  const auto train_clusters = load_required(cfg.data, "--data");
  const auto eval_clusters = cfg.dev.empty() ? train_clusters : load_clusters(cfg.dev);
  Resources res;
  res.vocab = cfg.checkpoint.empty() ? build_vocab(train_clusters, static_cast<std::size_t>(cfg.min_freq))
                                     : vocab_from_checkpoint(cfg.checkpoint);
  load_embeddings(cfg, res);
  std::optional<ModelParams> fixed;
  if (!cfg.checkpoint.empty()) fixed = load_model(cfg, cfg.model_config(), res.vocab);

  std::vector<KSweepRow> rows;
  for (double k : cfg.k_values) {
    RunConfig run = cfg;
    run.k = k;
    const ModelConfig mcfg = run.model_config();
    const auto eval = prepare_all(eval_clusters, res, mcfg, true);
    ModelParams params;
    if (fixed) {
      params = fixed->clone();
    } else {
      const auto train = prepare_all(train_clusters, res, mcfg, true);
      params = train_model(run, mcfg, res, train, {}, {}).params;
    }
    const auto texts = generate(eval, params, mcfg, res.vocab, cfg.beam_width);
    KSweepRow row;
    row.k = k;
    std::size_t scored = 0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
      row.mean_length += static_cast<double>(summary_length(texts[i]));
      if (!eval[i].reference) continue;
      const RougeTriple r = score_summary(tokenize(texts[i]), *eval[i].reference);
      row.rouge.r1 += r.r1;
      row.rouge.r2 += r.r2;
      row.rouge.rl += r.rl;
      ++scored;
    }
    if (!eval.empty()) row.mean_length /= static_cast<double>(eval.size());
    if (scored > 0) {
      row.rouge.r1 /= static_cast<double>(scored);
      row.rouge.r2 /= static_cast<double>(scored);
      row.rouge.rl /= static_cast<double>(scored);
    }
    rows.push_back(row);
  }
  std::ostringstream table;
  table << "k\tmean_length\tR-1\tR-2\tR-L\n";
  for (const auto& r : rows) {
    table << fmt2(r.k) << '\t' << fmt2(r.mean_length) << '\t' << fmt2(100 * r.rouge.r1) << '\t'
          << fmt2(100 * r.rouge.r2) << '\t' << fmt2(100 * r.rouge.rl) << '\n';
  }
  out << table.str();
  if (!cfg.out.empty()) {
    const fs::path dir = ensure_out_dir(cfg);
    echo_config(cfg, dir);
    write_text(dir / "ksweep.tsv", table.str());
  }
  return rows;
}

GraphDumpReport cmd_graph(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const ModelConfig mcfg = cfg.model_config();
  const auto clusters = load_required(cfg.data, "--data");
  const fs::path dir = ensure_out_dir(cfg);
  echo_config(cfg, dir);
  Resources res;
  load_embeddings(cfg, res);
  GraphDumpReport report;
  std::ostringstream summary;
  for (const auto& c : clusters) {
    const DocumentCluster kept = truncate_to_budget(c, static_cast<std::size_t>(cfg.max_input_len));
    const HeteroGraph g = build_hetero_graph(kept, res.table, *res.embedder, mcfg.graph);
    const std::string stem = safe_name(c.id);
    write_text(dir / (stem + ".dot"), to_dot(g));
    write_text(dir / (stem + ".json"), to_json(g));
    const ValidationReport v = validate_graph(g);
    ++report.clusters;
    report.violations += v.violations.size();
    summary << c.id << ": " << g.num_nodes() << " nodes, " << v.violations.size() << " violations\n";
    for (const auto& msg : v.violations) summary << "  " << msg << '\n';
  }
  summary << "total: " << report.clusters << " clusters, " << report.violations << " violations\n";
  write_text(dir / "validation.txt", summary.str());
  out << summary.str();
  return report;
}

RunConfig parse_run_config(int argc, const char* const* argv) {
  RunConfig cfg;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      cfg = load_run_config(argv[i + 1]);
    } else if (arg.rfind("--config=", 0) == 0) {
      cfg = load_run_config(arg.substr(9));
    }
  }

  CLI::App app{"Multi-document summarization over heterogeneous graphs"};
  app.require_subcommand(1);
  std::string config_path;
  std::string precision = cfg.precision;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    sub->add_option("--data", cfg.data, "Cluster records (JSON lines)");
    sub->add_option("--dev", cfg.dev, "Development clusters (JSON lines)");
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_option("--seed", cfg.seed, "Random seed");
    sub->add_option("--precision", cfg.precision, "single or double")->check(CLI::IsMember({"single", "double"}));
    sub->add_option("--embeddings", cfg.embeddings, "Static word vectors (text format)");
    sub->add_option("--embedding-dim", cfg.embedding_dim, "Word vector dimension");
    sub->add_option("--sentence-embeddings", cfg.sentence_embeddings, "Precomputed sentence vectors");
    sub->add_option("--max-input-len", cfg.max_input_len, "Encoder input budget in tokens");
    sub->add_option("--min-freq", cfg.min_freq, "Minimum token frequency for the vocabulary");
    sub->add_option("--we-threshold", cfg.we_threshold, "Cosine threshold for word-embedding edges");
    sub->add_option("--ss-threshold", cfg.ss_threshold, "Cosine threshold for sentence-similarity edges");
    sub->add_flag("--external-pos", cfg.external_pos, "Use dataset POS tags for noun detection");
    sub->add_option("--d-model", cfg.d_model, "Text model width");
    sub->add_option("--n-layers-enc", cfg.n_layers_enc, "Encoder layers");
    sub->add_option("--n-layers-dec", cfg.n_layers_dec, "Decoder layers");
    sub->add_option("--n-heads", cfg.n_heads, "Attention heads in the text model");
    sub->add_option("--ffn-dim", cfg.ffn_dim, "Feed-forward width");
    sub->add_option("--attention-window", cfg.attention_window, "Local attention radius");
    sub->add_option("--max-out-len", cfg.max_out_len, "Maximum summary length");
    sub->add_option("--dropout", cfg.dropout, "Dropout rate");
    sub->add_flag("--no-length-norm", cfg.no_length_norm, "Rank beams by raw log-probability");
    sub->add_option("--mgat-layers", cfg.mgat_layers, "Graph encoder layers");
    sub->add_option("--mgat-heads", cfg.mgat_heads, "Graph attention heads per channel");
    sub->add_option("--mgat-d-head", cfg.mgat_d_head, "Graph attention head width");
    sub->add_flag("--no-mgat", cfg.no_mgat, "Single-channel GAT over all edges");
    sub->add_flag("--no-residual", cfg.no_residual, "Disable residual connections between graph layers");
    sub->add_option("--k", cfg.k, "Fraction of sentence nodes kept by the compressor");
    sub->add_flag("--renorm-mask", cfg.renorm_mask, "Renormalize soft-mask scores within the selection");
    sub->add_flag("--no-compressor", cfg.no_compressor, "Feed all graph nodes to the decoder");
    sub->add_option("--beta", cfg.beta, "Weight of the cross-entropy loss");
    sub->add_option("--label-smoothing", cfg.label_smoothing, "Label smoothing factor");
    sub->add_option("--lr", cfg.lr, "Adam learning rate");
    sub->add_option("--epochs", cfg.epochs, "Training epochs");
    sub->add_option("--patience", cfg.patience, "Dev evaluations without improvement before stopping");
    sub->add_option("--accum", cfg.accum, "Gradient accumulation steps");
    sub->add_option("--max-steps", cfg.max_steps, "Stop after this many steps (0 = no cap)");
    sub->add_option("--dev-max-len", cfg.dev_max_len, "Greedy decoding length during dev evaluation");
    sub->add_option("--beam-width", cfg.beam_width, "Beam width");
    sub->add_option("--checkpoint", cfg.checkpoint, "Model checkpoint");
  };
  CLI::App* train = app.add_subcommand("train", "Train a model");
  CLI::App* summarize = app.add_subcommand("summarize", "Summarize clusters with a trained model");
  CLI::App* eval = app.add_subcommand("eval", "Score generated summaries against references");
  CLI::App* ksweep = app.add_subcommand("ksweep", "Summary length and ROUGE across compression ratios");
  CLI::App* graph = app.add_subcommand("graph", "Export and validate heterogeneous graphs");
  for (CLI::App* sub : {train, summarize, eval, ksweep, graph}) common(sub);
  eval->add_option("--generated", cfg.generated, "Generated summaries (JSON lines of id, summary)");
  eval->add_option("--references", cfg.references, "Clusters with reference summaries");
  ksweep->add_option("--k-values", cfg.k_values, "Compression ratios to compare")->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App* sub = nullptr;
    for (CLI::App* s : {train, summarize, eval, ksweep, graph})
      if (s->parsed()) sub = s;
    throw HelpRequested(sub ? sub->help() : app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
  for (CLI::App* sub : {train, summarize, eval, ksweep, graph}) {
    if (sub->parsed()) cfg.command = sub->get_name();
  }
  return cfg;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = parse_run_config(argc, argv);
    if (cfg.command == "train") {
      cmd_train(cfg, out);
    } else if (cfg.command == "summarize") {
      cmd_summarize(cfg, out);
    } else if (cfg.command == "eval") {
      cmd_eval(cfg, out);
    } else if (cfg.command == "ksweep") {
      cmd_ksweep(cfg, out);
    } else if (cfg.command == "graph") {
      if (cmd_graph(cfg, out).violations > 0) {
        err << "error: graph validation failed\n";
        return 2;
      }
    } else {
      throw ConfigError("unknown command '" + cfg.command + "'");
    }
    return 0;
  } catch (const HelpRequested& h) {
    out << h.what();
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace hgsum
