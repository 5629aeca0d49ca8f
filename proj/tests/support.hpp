#pragma once

#include "hgsum/config.hpp"
#include "hgsum/hetgraph.hpp"
#include "hgsum/model.hpp"
#include "hgsum/rouge.hpp"
#include "hgsum/training.hpp"

#include <cmath>
#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace testing {

using namespace hgsum;

inline std::string data_path(const std::string& name) { return std::string(HGSUM_TEST_DATA) + "/" + name; }

// Small enough to overfit the toy corpus in a few seconds.
inline RunConfig tiny_run_config() {
  RunConfig c;
  c.embeddings = data_path("vectors.txt");
  c.embedding_dim = 16;
  c.data = data_path("toy.jsonl");
  c.min_freq = 1;
  c.max_input_len = 128;
  c.max_out_len = 24;
  c.d_model = 32;
  c.n_layers_enc = 1;
  c.n_layers_dec = 1;
  c.n_heads = 2;
  c.ffn_dim = 64;
  c.attention_window = 8;
  c.dropout = 0.0;
  c.mgat_layers = 1;
  c.mgat_heads = 1;
  c.mgat_d_head = 8;
  c.label_smoothing = 0.0;
  c.lr = 3e-3;
  c.epochs = 250;
  c.patience = 0;
  c.dev_max_len = 24;
  c.seed = 1;
  return c;
}

struct ToyWorld {
  std::vector<DocumentCluster> clusters;
  Vocab vocab;
  EmbeddingTable table;
  std::unique_ptr<SentenceEmbedder> embedder;

  explicit ToyWorld(std::size_t min_freq = 1) {
    clusters = load_clusters(data_path("toy.jsonl"));
    vocab = build_vocab(clusters, min_freq);
    table = load_static_embeddings(data_path("vectors.txt"), 16);
    embedder = std::make_unique<SentenceEmbedder>(table);
  }
  GraphResources resources() const { return {&vocab, &table, embedder.get()}; }
};

inline DocumentCluster make_cluster(const std::string& id, const std::vector<std::string>& docs,
                                    const std::string& summary = "") {
  DocumentCluster c;
  c.id = id;
  for (const auto& d : docs) c.documents.push_back(Document{tokenize(d)});
  if (!summary.empty()) c.summary = tokenize(summary);
  return c;
}

// Deterministic pseudo-random vectors for a fixed vocabulary.
inline EmbeddingTable random_table(const std::vector<std::string>& words, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::unordered_map<std::string, Vector> m;
  for (const auto& w : words) {
    Vector v(static_cast<Index>(dim));
    for (Index i = 0; i < v.size(); ++i) v(i) = nd(rng);
    m[w] = v;
  }
  return EmbeddingTable(dim, std::move(m));
}

// Brute-force cosine written out with explicit sums.
inline double plain_cosine(const Vector& a, const Vector& b) {
  double dot = 0, na = 0, nb = 0;
  for (Index i = 0; i < a.size(); ++i) {
    dot += a(i) * b(i);
    na += a(i) * a(i);
    nb += b(i) * b(i);
  }
  if (std::sqrt(na) < 1e-12 || std::sqrt(nb) < 1e-12) return 0.0;
  return std::max(-1.0, std::min(1.0, dot / std::sqrt(na * nb)));
}

// Expected graph enumerated from the raw cluster by a direct reading of the
// construction rules. Node ids: documents, then sentences in (doc, sent)
// order, then tokens in reading order.
struct OracleGraph {
  std::size_t n_docs = 0, n_sents = 0, n_words = 0;
  // (type, a, b) with a < b -> weight
  std::map<std::tuple<int, Index, Index>, double> edges;

  std::size_t count(EdgeType t) const {
    std::size_t n = 0;
    for (const auto& [k, w] : edges) n += std::get<0>(k) == static_cast<int>(t);
    return n;
  }
};

inline OracleGraph enumerate_graph(const DocumentCluster& c, const EmbeddingTable& table, const GraphConfig& cfg) {
  OracleGraph o;
  struct SentInfo {
    std::size_t doc;
    const Sentence* s;
    Index id;
    Index first_word;
  };
  std::vector<SentInfo> sents;
  o.n_docs = c.documents.size();
  Index next_sentence = static_cast<Index>(o.n_docs);
  std::size_t total_sents = 0;
  for (const auto& d : c.documents) total_sents += d.sentences.size();
  Index next_word = static_cast<Index>(o.n_docs + total_sents);
  for (std::size_t d = 0; d < c.documents.size(); ++d) {
    for (const auto& s : c.documents[d].sentences) {
      sents.push_back({d, &s, next_sentence++, next_word});
      next_word += static_cast<Index>(s.tokens.size());
      o.n_words += s.tokens.size();
    }
  }
  o.n_sents = sents.size();
  auto put = [&](EdgeType t, Index a, Index b, double w) {
    if (a > b) std::swap(a, b);
    o.edges[{static_cast<int>(t), a, b}] = w;
  };
  for (const auto& si : sents) {
    put(EdgeType::DS, static_cast<Index>(si.doc), si.id, 1.0);
    for (std::size_t k = 0; k < si.s->tokens.size(); ++k) {
      put(EdgeType::SW, si.id, si.first_word + static_cast<Index>(k), 1.0);
      if (k > 0) put(EdgeType::WO, si.first_word + static_cast<Index>(k) - 1, si.first_word + static_cast<Index>(k), 1.0);
    }
  }
  for (std::size_t a = 0; a < o.n_docs; ++a) {
    for (std::size_t b = a + 1; b < o.n_docs; ++b) {
      put(EdgeType::DD, static_cast<Index>(a), static_cast<Index>(b),
          rouge_avg_f1(rouge_sentences(c.documents[a].sentences), rouge_sentences(c.documents[b].sentences)));
    }
  }
  auto mean_vec = [&](const Sentence& s) {
    Vector v = Vector::Zero(static_cast<Index>(table.dimension()));
    for (const auto& t : s.tokens) v += table.lookup(t);
    return Vector(v / static_cast<double>(s.tokens.size()));
  };
  for (std::size_t a = 0; a < sents.size(); ++a) {
    for (std::size_t b = a + 1; b < sents.size(); ++b) {
      double w = plain_cosine(mean_vec(*sents[a].s), mean_vec(*sents[b].s));
      if (cfg.ss_threshold && w < *cfg.ss_threshold) continue;
      put(EdgeType::SS, sents[a].id, sents[b].id, w);
    }
  }
  std::vector<std::pair<Index, std::string>> nouns;
  for (const auto& si : sents) {
    for (std::size_t k = 0; k < si.s->tokens.size(); ++k) {
      const std::string& t = si.s->tokens[k];
      bool alpha = !t.empty();
      for (char ch : t) alpha = alpha && std::isalpha(static_cast<unsigned char>(ch));
      if (alpha && !is_stopword(t)) nouns.emplace_back(si.first_word + static_cast<Index>(k), t);
    }
  }
  for (std::size_t a = 0; a < nouns.size(); ++a) {
    for (std::size_t b = a + 1; b < nouns.size(); ++b) {
      double w = plain_cosine(table.lookup(nouns[a].second), table.lookup(nouns[b].second));
      if (cfg.we_threshold > 0.0 && w < cfg.we_threshold) continue;
      put(EdgeType::WE, nouns[a].first, nouns[b].first, w);
    }
  }
  return o;
}

struct GraphComparison {
  bool counts_match = true;
  double max_weight_error = 0.0;
  std::string first_problem;
};

inline GraphComparison compare_graph(const HeteroGraph& g, const OracleGraph& o) {
  GraphComparison r;
  auto fail = [&](const std::string& why) {
    r.counts_match = false;
    if (r.first_problem.empty()) r.first_problem = why;
  };
  if (g.count(NodeKind::Document) != o.n_docs) fail("document count");
  if (g.count(NodeKind::Sentence) != o.n_sents) fail("sentence count");
  if (g.count(NodeKind::Word) != o.n_words) fail("word count");
  for (EdgeType t : kEdgeTypes) {
    if (g.edge_count(t) != o.count(t)) fail(std::string(edge_type_name(t)) + " edge count");
    for (const Edge& e : g.edges(t)) {
      auto it = o.edges.find({static_cast<int>(t), e.a, e.b});
      if (it == o.edges.end()) {
        fail(std::string(edge_type_name(t)) + " unexpected edge " + std::to_string(e.a) + "-" + std::to_string(e.b));
        continue;
      }
      r.max_weight_error = std::max(r.max_weight_error, std::abs(it->second - e.weight));
    }
  }
  return r;
}

// Central differences written independently of the library's grad_check.
// Returns the largest |a - n| / max(|a|, |n|, floor) over every entry.
inline double finite_difference_error(const std::function<Value()>& loss, const std::vector<Value>& inputs,
                                      double eps = 1e-6, double floor = 1e-8) {
  for (const auto& in : inputs) in.node()->grad.resize(0, 0);
  Value l = loss();
  l.backward();
  std::vector<Matrix> analytic;
  for (const auto& in : inputs) analytic.push_back(in.grad());
  double worst = 0.0;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    Matrix& x = inputs[p].node()->data;
    for (Index i = 0; i < x.size(); ++i) {
      const double keep = x.data()[i];
      x.data()[i] = keep + eps;
      double up, down;
      {
        NoGradGuard g;
        up = loss().item();
      }
      x.data()[i] = keep - eps;
      {
        NoGradGuard g;
        down = loss().item();
      }
      x.data()[i] = keep;
      const double num = (up - down) / (2 * eps);
      const double a = analytic[p].data()[i];
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor}));
    }
  }
  return worst;
}

inline Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

// Random heterogeneous-looking graph: every node kind present, random typed
// edges with weights in range, plus the DS/SW hierarchy.
inline HeteroGraph random_graph(Index n_docs, Index n_sents, Index n_words, std::mt19937_64& rng, double edge_p = 0.3) {
  HeteroGraph g;
  g.cluster_id = "random";
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index d = 0; d < n_docs; ++d) {
    GraphNode n;
    n.kind = NodeKind::Document;
    n.index = d;
    n.doc = static_cast<std::size_t>(d);
    g.nodes.push_back(n);
  }
  for (Index s = 0; s < n_sents; ++s) {
    GraphNode n;
    n.kind = NodeKind::Sentence;
    n.index = s;
    n.doc = static_cast<std::size_t>(s % n_docs);
    n.sent = static_cast<std::size_t>(s);
    g.nodes.push_back(n);
  }
  for (Index w = 0; w < n_words; ++w) {
    GraphNode n;
    n.kind = NodeKind::Word;
    n.index = w;
    n.doc = static_cast<std::size_t>((w % n_sents) % n_docs);
    n.sent = static_cast<std::size_t>(w % n_sents);
    n.token = static_cast<std::size_t>(w / n_sents);
    g.nodes.push_back(n);
  }
  for (Index i = 0; i < g.num_nodes(); ++i) g.nodes[static_cast<std::size_t>(i)].token_position = i;
  for (auto& adj : g.adjacency) adj.resize(g.nodes.size());
  const Index s0 = n_docs, w0 = n_docs + n_sents;
  for (Index s = 0; s < n_sents; ++s) add_edge(g, EdgeType::DS, s % n_docs, s0 + s, 1.0);
  for (Index w = 0; w < n_words; ++w) add_edge(g, EdgeType::SW, s0 + w % n_sents, w0 + w, 1.0);
  for (Index a = 0; a < n_docs; ++a)
    for (Index b = a + 1; b < n_docs; ++b) add_edge(g, EdgeType::DD, a, b, u(rng));
  for (Index a = 0; a < n_sents; ++a)
    for (Index b = a + 1; b < n_sents; ++b)
      if (u(rng) < edge_p) add_edge(g, EdgeType::SS, s0 + a, s0 + b, 2 * u(rng) - 1);
  for (Index a = 0; a < n_words; ++a)
    for (Index b = a + 1; b < n_words; ++b) {
      if (u(rng) < edge_p) add_edge(g, EdgeType::WE, w0 + a, w0 + b, 2 * u(rng) - 1);
      if (u(rng) < edge_p) add_edge(g, EdgeType::WO, w0 + a, w0 + b, 1.0);
    }
  return g;
}

}  // namespace testing
