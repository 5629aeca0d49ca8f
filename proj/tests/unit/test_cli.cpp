#include "doctest.h"
#include "support.hpp"

#include "hgsum/cli.hpp"
#include "hgsum/errors.hpp"
#include "hgsum/rouge.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hgsum;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path(HGSUM_TEST_TMP) / "cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hgsum");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

RunConfig quick_config() {
  RunConfig c = testing::tiny_run_config();
  c.epochs = 2;
  return c;
}

fs::path write_config(const RunConfig& c, const fs::path& dir) {
  const fs::path p = dir / "run.json";
  write_file(p, to_json(c).dump(2));
  return p;
}

// One shared checkpoint for the decoding tests.
const TrainArtifacts& shared_model() {
  static const TrainArtifacts art = [] {
    RunConfig c = quick_config();
    c.epochs = 5;
    c.out = fresh_dir("shared").string();
    std::ostringstream sink;
    return cmd_train(c, sink);
  }();
  return art;
}

std::string generated_jsonl(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string s;
  for (const auto& [id, text] : rows) s += nlohmann::json{{"id", id}, {"summary", text}}.dump() + "\n";
  return s;
}

}  // namespace

TEST_CASE("config file keys map onto flags and flags win") {
  const fs::path dir = fresh_dir("layering");
  RunConfig base = quick_config();
  base.d_model = 24;
  base.k = 0.3;
  const fs::path file = write_config(base, dir);
  std::vector<std::string> args{"hgsum", "train", "--config", file.string(), "--k", "0.7"};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  RunConfig got = parse_run_config(static_cast<int>(argv.size()), argv.data());
  CHECK(got.command == "train");
  CHECK(got.d_model == 24);
  CHECK(got.k == doctest::Approx(0.7));
  CHECK(got.data == base.data);

  RunConfig round;
  apply_json(to_json(got), round);
  CHECK(to_json(round) == to_json(got));
}

TEST_CASE("unknown or ill-typed config keys are rejected") {
  const fs::path dir = fresh_dir("strict");
  nlohmann::json j = to_json(quick_config());
  j["learning_rate"] = 0.1;
  write_file(dir / "bad.json", j.dump());
  auto r = cli({"train", "--config", (dir / "bad.json").string(), "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("learning_rate") != std::string::npos);

  nlohmann::json t = to_json(quick_config());
  t["d_model"] = "wide";
  write_file(dir / "typed.json", t.dump());
  CHECK(cli({"train", "--config", (dir / "typed.json").string()}).code == 1);
  CHECK_THROWS(load_run_config((dir / "missing.json").string()));
}

TEST_CASE("usage errors exit 1, data errors exit 2") {
  CHECK(cli({}).code == 1);
  auto help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("ksweep") != std::string::npos);
  auto sub = cli({"train", "--help"});
  CHECK(sub.code == 0);
  CHECK(sub.out.find("--no-compressor") != std::string::npos);
  CHECK(cli({"train", "--bogus-flag"}).code == 1);
  CHECK(cli({"train", "--precision", "half"}).code == 1);
  const fs::path dir = fresh_dir("codes");
  RunConfig c = quick_config();
  c.data = (dir / "absent.jsonl").string();
  auto r = cli({"train", "--config", write_config(c, dir).string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("absent.jsonl") != std::string::npos);
  write_file(dir / "broken.jsonl", "{\"id\": \"a\", \"documents\": [\"x.\"], \"summary\": \"y\"}\n{not json\n");
  c.data = (dir / "broken.jsonl").string();
  r = cli({"train", "--config", write_config(c, dir).string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("train writes checkpoint, metric log and resolved config") {
  const auto& art = shared_model();
  CHECK(fs::exists(art.checkpoint));
  CHECK(fs::exists(art.metrics));
  CHECK(fs::exists(art.config));
  std::ifstream in(art.metrics);
  std::string line;
  int steps = 0, devs = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    steps += j["type"] == "step";
    devs += j["type"] == "dev";
  }
  CHECK(steps == 40);
  CHECK(devs == 0);
  RunConfig echoed = load_run_config(art.config);
  CHECK(echoed.epochs == 5);
  CHECK(echoed.d_model == 32);
}

TEST_CASE("rerun from the echoed config reproduces the metric log") {
  const fs::path a = fresh_dir("repro_a"), b = fresh_dir("repro_b");
  RunConfig c = quick_config();
  c.dropout = 0.1;
  c.dev = testing::data_path("toy.jsonl");
  auto first = cli({"train", "--config", write_config(c, a).string(), "--out", a.string()});
  REQUIRE(first.code == 0);
  auto second = cli({"train", "--config", (a / "config.json").string(), "--out", b.string()});
  REQUIRE(second.code == 0);
  CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
  const auto ca = read_checkpoint((a / "checkpoint.bin").string());
  const auto cb = read_checkpoint((b / "checkpoint.bin").string());
  REQUIRE(ca.tensors.size() == cb.tensors.size());
  for (std::size_t i = 0; i < ca.tensors.size(); ++i) {
    CHECK(ca.tensors[i].first == cb.tensors[i].first);
    CHECK(ca.tensors[i].second == cb.tensors[i].second);
  }
  // Only the echoed output path differs.
  const auto upto = [](const std::string& s) { return s.substr(0, s.find("wrote ")); };
  CHECK(upto(first.out) == upto(second.out));
}

TEST_CASE("ablation flags train and change the model") {
  const fs::path dir = fresh_dir("ablate");
  RunConfig c = quick_config();
  c.epochs = 1;
  auto full = cli({"train", "--config", write_config(c, dir).string(), "--out", (dir / "full").string()});
  auto ablated = cli({"train", "--config", write_config(c, dir).string(), "--out", (dir / "triple").string(),
                      "--no-mgat", "--no-compressor", "--beta", "1.0"});
  REQUIRE(full.code == 0);
  REQUIRE(ablated.code == 0);
  RunConfig echoed = load_run_config((dir / "triple" / "config.json").string());
  CHECK(echoed.no_mgat);
  CHECK(echoed.no_compressor);
  CHECK(echoed.beta == 1.0);
  CHECK(read_checkpoint((dir / "full" / "checkpoint.bin").string()).tensors.size() !=
        read_checkpoint((dir / "triple" / "checkpoint.bin").string()).tensors.size());
}

TEST_CASE("summarize emits one record per cluster and beam 1 matches greedy") {
  const auto& art = shared_model();
  RunConfig c = load_run_config(art.config);
  c.checkpoint = art.checkpoint;
  c.out.clear();
  c.beam_width = 1;
  std::ostringstream out;
  auto records = cmd_summarize(c, out);

  testing::ToyWorld w;
  REQUIRE(records.size() == w.clusters.size());
  const ModelConfig mcfg = c.model_config();
  ModelParams params = init_params(model_plan(mcfg, w.vocab.size()), 99);
  load_checkpoint(art.checkpoint, params);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].id == w.clusters[i].id);
    const auto ex = prepare_example(w.clusters[i], w.resources(), mcfg, false);
    const auto ids = summarize_ids(ex, params, mcfg, 0, mcfg.text.max_out_len);
    CHECK(records[i].summary == detokenize(ids, w.vocab));
  }
  std::istringstream lines(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) n += !line.empty();
  CHECK(n == records.size());
}

TEST_CASE("summarize on an empty file writes nothing") {
  const auto& art = shared_model();
  const fs::path dir = fresh_dir("empty");
  write_file(dir / "none.jsonl", "");
  RunConfig c = load_run_config(art.config);
  c.checkpoint = art.checkpoint;
  c.data = (dir / "none.jsonl").string();
  c.out = (dir / "out").string();
  std::ostringstream out;
  CHECK(cmd_summarize(c, out).empty());
  CHECK(slurp(dir / "out" / "summaries.jsonl").empty());
}

TEST_CASE("checkpoint dimension mismatch names the parameter") {
  const auto& art = shared_model();
  RunConfig c = load_run_config(art.config);
  c.checkpoint = art.checkpoint;
  c.out.clear();
  c.d_model = 16;
  std::ostringstream out;
  try {
    cmd_summarize(c, out);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    INFO(msg);
    CHECK(msg.find("parameter 'emb.tok'") != std::string::npos);
  }
  c.d_model = 32;
  c.no_mgat = true;
  CHECK_THROWS_AS(cmd_summarize(c, out), ConfigError);
}

TEST_CASE("eval scores identity at 1, disjoint at 0 and matches the per-cluster mean") {
  std::vector<std::pair<std::string, std::string>> refs;
  {
    std::ifstream in(testing::data_path("toy.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line);
      refs.push_back({j["id"], j["summary"]});
    }
  }
  const fs::path dir = fresh_dir("eval");
  std::vector<std::pair<std::string, std::string>> disjoint, mixed;
  double r1 = 0, r2 = 0, rl = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    disjoint.push_back({refs[i].first, "zzz qqq xxyy."});
    // Alternate between the reference and another cluster's reference.
    const std::string text = i % 2 ? refs[i].second : refs[(i + 1) % refs.size()].second;
    mixed.push_back({refs[i].first, text});
    const auto cand = rouge_sentences(tokenize(text)), ref = rouge_sentences(tokenize(refs[i].second));
    r1 += rouge_n(flatten(cand), flatten(ref), 1).f1;
    r2 += rouge_n(flatten(cand), flatten(ref), 2).f1;
    rl += rouge_l_summary(cand, ref).f1;
  }
  const double n = static_cast<double>(refs.size());
  RunConfig cfg;
  cfg.references = testing::data_path("toy.jsonl");
  std::ostringstream out;

  write_file(dir / "same.jsonl", generated_jsonl(refs));
  cfg.generated = (dir / "same.jsonl").string();
  auto rep = cmd_eval(cfg, out);
  CHECK(rep.clusters == refs.size());
  CHECK(std::abs(rep.mean.r1 - 1.0) < 1e-12);
  CHECK(std::abs(rep.mean.r2 - 1.0) < 1e-12);
  CHECK(std::abs(rep.mean.rl - 1.0) < 1e-12);
  CHECK(out.str().find("R-1 100.00  R-2 100.00  R-L 100.00") != std::string::npos);

  write_file(dir / "disjoint.jsonl", generated_jsonl(disjoint));
  cfg.generated = (dir / "disjoint.jsonl").string();
  rep = cmd_eval(cfg, out);
  CHECK(rep.mean.r1 == 0.0);
  CHECK(rep.mean.r2 == 0.0);
  CHECK(rep.mean.rl == 0.0);

  write_file(dir / "mixed.jsonl", generated_jsonl(mixed));
  cfg.generated = (dir / "mixed.jsonl").string();
  rep = cmd_eval(cfg, out);
  CHECK(std::abs(rep.mean.r1 - r1 / n) < 1e-12);
  CHECK(std::abs(rep.mean.r2 - r2 / n) < 1e-12);
  CHECK(std::abs(rep.mean.rl - rl / n) < 1e-12);
}

TEST_CASE("eval id mismatch lists the missing ids") {
  testing::ToyWorld w;
  const fs::path dir = fresh_dir("eval_ids");
  std::vector<std::pair<std::string, std::string>> rows;
  for (std::size_t i = 1; i < w.clusters.size(); ++i) rows.push_back({w.clusters[i].id, "x."});
  rows.push_back({"stray", "y."});
  write_file(dir / "gen.jsonl", generated_jsonl(rows));
  auto r = cli({"eval", "--generated", (dir / "gen.jsonl").string(), "--references", testing::data_path("toy.jsonl")});
  CHECK(r.code == 2);
  CHECK(r.err.find(w.clusters[0].id) != std::string::npos);
  CHECK(r.err.find("stray") != std::string::npos);
}

TEST_CASE("ksweep needs two k values and emits one row per k") {
  const auto& art = shared_model();
  const fs::path dir = fresh_dir("ksweep");
  RunConfig c = load_run_config(art.config);
  c.checkpoint = art.checkpoint;
  c.out = dir.string();
  c.beam_width = 1;
  std::ostringstream out;
  c.k_values = {1.0};
  CHECK_THROWS_AS(cmd_ksweep(c, out), ConfigError);
  c.k_values = {0.2, 0.5, 1.0};
  auto rows = cmd_ksweep(c, out);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].k == c.k_values[i]);
  CHECK(fs::exists(dir / "ksweep.tsv"));

  // The k = 1 row re-decodes exactly what summarize produces at k = 1.
  RunConfig s = c;
  s.k = 1.0;
  s.out.clear();
  std::ostringstream sink;
  auto records = cmd_summarize(s, sink);
  double len = 0;
  for (const auto& r : records)
    for (const auto& sent : tokenize(r.summary)) len += static_cast<double>(sent.tokens.size());
  CHECK(rows[2].mean_length == doctest::Approx(len / static_cast<double>(records.size())).epsilon(1e-12));

  // At k = 1 every node survives, so only the soft mask differs from no compression.
  testing::ToyWorld w;
  std::mt19937_64 rng(3);
  for (const auto& cl : w.clusters) {
    auto g = build_hetero_graph(cl, w.table, *w.embedder, {});
    Value q(testing::random_matrix(g.num_nodes(), 4, rng));
    Value r(testing::random_matrix(1, 4, rng));
    CompressorConfig cc;
    cc.k = 1.0;
    auto out1 = compress_graph(q, r, g, cc);
    CHECK(static_cast<Index>(out1.nodes.size()) == g.num_nodes());
    const Matrix t = node_scores(q, r).data();
    for (Index i = 0; i < g.num_nodes(); ++i)
      CHECK((out1.rows.data().row(i) - q.data().row(i) * t(0, i)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("graph exports match the enumeration oracle with no violations") {
  const fs::path dir = fresh_dir("graph");
  RunConfig c = quick_config();
  auto r = cli({"graph", "--config", write_config(c, dir).string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find(" 0 violations\n") != std::string::npos);
  testing::ToyWorld w;
  const GraphConfig gcfg = c.model_config().graph;
  for (const auto& cl : w.clusters) {
    const fs::path json = dir / "out" / (cl.id + ".json");
    REQUIRE(fs::exists(json));
    CHECK(fs::exists(dir / "out" / (cl.id + ".dot")));
    auto j = nlohmann::json::parse(slurp(json));
    auto o = testing::enumerate_graph(cl, w.table, gcfg);
    CHECK(j["node_counts"]["document"] == o.n_docs);
    CHECK(j["node_counts"]["sentence"] == o.n_sents);
    CHECK(j["node_counts"]["word"] == o.n_words);
    for (EdgeType t : kEdgeTypes) CHECK(j["edge_counts"][std::string(edge_type_name(t))] == o.count(t));
  }
  CHECK(fs::exists(dir / "out" / "validation.txt"));
  CHECK(fs::exists(dir / "out" / "config.json"));
}
