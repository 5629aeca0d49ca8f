#include "hgsum/hetgraph.hpp"

#include "hgsum/errors.hpp"
#include "hgsum/rouge.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <queue>
#include <sstream>

namespace hgsum {

std::string_view edge_type_name(EdgeType t) {
  switch (t) {
    case EdgeType::WE: return "WE";
    case EdgeType::WO: return "WO";
    case EdgeType::SS: return "SS";
    case EdgeType::DD: return "DD";
    case EdgeType::DS: return "DS";
    case EdgeType::SW: return "SW";
  }
  return "?";
}

std::string_view node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Document: return "document";
    case NodeKind::Sentence: return "sentence";
    case NodeKind::Word: return "word";
  }
  return "?";
}

std::size_t HeteroGraph::count(NodeKind kind) const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [kind](const GraphNode& n) { return n.kind == kind; }));
}

std::vector<Index> HeteroGraph::nodes_of(NodeKind kind) const {
  std::vector<Index> out;
  for (Index i = 0; i < num_nodes(); ++i) {
    if (nodes[static_cast<std::size_t>(i)].kind == kind) out.push_back(i);
  }
  return out;
}

std::vector<Edge> HeteroGraph::edges(EdgeType t) const {
  std::vector<Edge> out;
  const auto& adj = adjacency[static_cast<std::size_t>(t)];
  for (std::size_t a = 0; a < adj.size(); ++a) {
    for (const auto& nb : adj[a]) {
      if (static_cast<Index>(a) < nb.node) out.push_back(Edge{static_cast<Index>(a), nb.node, nb.weight});
    }
  }
  return out;
}

std::size_t HeteroGraph::edge_count(EdgeType t) const { return edges(t).size(); }

std::set<std::size_t> noun_candidates(const Sentence& sentence, bool external_pos) {
  std::set<std::size_t> out;
  if (external_pos) {
    if (sentence.pos.size() != sentence.tokens.size()) {
      throw DataError("POS annotation length " + std::to_string(sentence.pos.size()) + " does not match " +
                      std::to_string(sentence.tokens.size()) + " tokens");
    }
    for (std::size_t i = 0; i < sentence.pos.size(); ++i) {
      if (sentence.pos[i] == "NOUN" || sentence.pos[i] == "PROPN") out.insert(i);
    }
    return out;
  }
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const std::string& t = sentence.tokens[i];
    bool alpha = !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
      return std::isalpha(static_cast<unsigned char>(c)) != 0;
    });
    if (alpha && !is_stopword(t)) out.insert(i);
  }
  return out;
}

void add_edge(HeteroGraph& g, EdgeType t, Index a, Index b, double weight) {
  if (a == b) return;
  auto& adj = g.adjacency[static_cast<std::size_t>(t)];
  if (adj.size() < g.nodes.size()) adj.resize(g.nodes.size());
  auto insert = [&](Index from, Index to) {
    auto& list = adj[static_cast<std::size_t>(from)];
    auto it = std::lower_bound(list.begin(), list.end(), to, [](const Neighbor& n, Index id) { return n.node < id; });
    list.insert(it, Neighbor{to, weight});
  };
  insert(a, b);
  insert(b, a);
}

HeteroGraph build_hetero_graph(const DocumentCluster& text, const EmbeddingTable& table, const SentenceEmbedder& embedder,
                               const GraphConfig& cfg) {
  if (text.documents.empty()) throw DataError("cannot build a graph for empty cluster '" + text.id + "'");
  HeteroGraph g;
  g.cluster_id = text.id;
  const BoundaryIndex layout = layout_boundaries(text);

  for (std::size_t d = 0; d < text.documents.size(); ++d) {
    GraphNode n;
    n.kind = NodeKind::Document;
    n.index = static_cast<Index>(d);
    n.doc = d;
    n.token_position = layout.doc_sep[d];
    g.nodes.push_back(n);
  }
  const Index first_sentence = g.num_nodes();
  for (std::size_t s = 0; s < layout.sentences.size(); ++s) {
    const auto& sb = layout.sentences[s];
    GraphNode n;
    n.kind = NodeKind::Sentence;
    n.index = static_cast<Index>(s);
    n.doc = sb.doc;
    n.sent = sb.sent;
    n.token_position = sb.sep_pos;
    g.nodes.push_back(n);
  }
  // Word node ids per sentence, in token order.
  std::vector<std::vector<Index>> sentence_words(layout.sentences.size());
  Index word_ordinal = 0;
  for (std::size_t s = 0; s < layout.sentences.size(); ++s) {
    const auto& sb = layout.sentences[s];
    const Sentence& sent = text.documents[sb.doc].sentences[sb.sent];
    for (std::size_t k = 0; k < sent.tokens.size(); ++k) {
      GraphNode n;
      n.kind = NodeKind::Word;
      n.index = word_ordinal++;
      n.doc = sb.doc;
      n.sent = sb.sent;
      n.token = k;
      n.token_position = sb.token_begin + static_cast<Index>(k);
      sentence_words[s].push_back(g.num_nodes());
      g.nodes.push_back(n);
    }
  }
  for (auto& adj : g.adjacency) adj.resize(g.nodes.size());

  // Hierarchy and word order.
  for (std::size_t s = 0; s < layout.sentences.size(); ++s) {
    const Index sid = first_sentence + static_cast<Index>(s);
    add_edge(g, EdgeType::DS, static_cast<Index>(layout.sentences[s].doc), sid, 1.0);
    const auto& words = sentence_words[s];
    for (std::size_t k = 0; k < words.size(); ++k) {
      add_edge(g, EdgeType::SW, sid, words[k], 1.0);
      if (k + 1 < words.size()) add_edge(g, EdgeType::WO, words[k], words[k + 1], 1.0);
    }
  }

  // Document similarity.
  std::vector<std::vector<TokenList>> doc_tokens;
  for (const auto& doc : text.documents) doc_tokens.push_back(rouge_sentences(doc.sentences));
  for (std::size_t a = 0; a < text.documents.size(); ++a) {
    for (std::size_t b = a + 1; b < text.documents.size(); ++b) {
      add_edge(g, EdgeType::DD, static_cast<Index>(a), static_cast<Index>(b), rouge_avg_f1(doc_tokens[a], doc_tokens[b]));
    }
  }

  // Sentence similarity across the whole cluster.
  std::vector<Vector> sent_vecs;
  for (const auto& sb : layout.sentences) {
    sent_vecs.push_back(embedder.embed(text.documents[sb.doc].sentences[sb.sent], text.id, sb.doc, sb.sent));
  }
  for (std::size_t a = 0; a < sent_vecs.size(); ++a) {
    for (std::size_t b = a + 1; b < sent_vecs.size(); ++b) {
      double w = cosine(sent_vecs[a], sent_vecs[b]);
      if (cfg.ss_threshold && w < *cfg.ss_threshold) continue;
      add_edge(g, EdgeType::SS, first_sentence + static_cast<Index>(a), first_sentence + static_cast<Index>(b), w);
    }
  }

  // Noun-noun similarity over all noun occurrences in the cluster.
  std::vector<std::pair<Index, const Vector*>> nouns;
  for (std::size_t s = 0; s < layout.sentences.size(); ++s) {
    const auto& sb = layout.sentences[s];
    const Sentence& sent = text.documents[sb.doc].sentences[sb.sent];
    for (std::size_t k : noun_candidates(sent, cfg.external_pos)) {
      nouns.emplace_back(sentence_words[s][k], &table.lookup(sent.tokens[k]));
    }
  }
  for (std::size_t a = 0; a < nouns.size(); ++a) {
    for (std::size_t b = a + 1; b < nouns.size(); ++b) {
      double w = cosine(*nouns[a].second, *nouns[b].second);
      if (cfg.we_threshold > 0.0 && w < cfg.we_threshold) continue;
      add_edge(g, EdgeType::WE, nouns[a].first, nouns[b].first, w);
    }
  }
  return g;
}

const std::vector<Neighbor>& neighbors(const HeteroGraph& g, Index node, EdgeType t) {
  if (node < 0 || node >= g.num_nodes()) throw DataError("unknown node " + std::to_string(node));
  return g.adjacency[static_cast<std::size_t>(t)][static_cast<std::size_t>(node)];
}

namespace {

bool kinds_match(EdgeType t, NodeKind a, NodeKind b) {
  auto pair_is = [&](NodeKind x, NodeKind y) { return (a == x && b == y) || (a == y && b == x); };
  switch (t) {
    case EdgeType::WE:
    case EdgeType::WO: return pair_is(NodeKind::Word, NodeKind::Word);
    case EdgeType::SS: return pair_is(NodeKind::Sentence, NodeKind::Sentence);
    case EdgeType::DD: return pair_is(NodeKind::Document, NodeKind::Document);
    case EdgeType::DS: return pair_is(NodeKind::Document, NodeKind::Sentence);
    case EdgeType::SW: return pair_is(NodeKind::Sentence, NodeKind::Word);
  }
  return false;
}

std::string fmt_weight(double w) {
  std::ostringstream os;
  os << std::setprecision(17) << w;
  return os.str();
}

}  // namespace

ValidationReport validate_graph(const HeteroGraph& g) {
  ValidationReport r;
  auto fail = [&](std::string msg) { r.violations.push_back(std::move(msg)); };
  const Index n = g.num_nodes();

  for (Index i = 0; i < n; ++i) {
    const auto& node = g.nodes[static_cast<std::size_t>(i)];
    bool ok = true;
    switch (node.kind) {
      case NodeKind::Document: ok = node.doc && !node.sent && !node.token; break;
      case NodeKind::Sentence: ok = node.doc && node.sent && !node.token; break;
      case NodeKind::Word: ok = node.doc && node.sent && node.token; break;
    }
    if (!ok) fail("node " + std::to_string(i) + ": origin fields inconsistent with kind " + std::string(node_kind_name(node.kind)));
  }
  std::set<Index> positions;
  for (Index i = 0; i < n; ++i) {
    Index p = g.nodes[static_cast<std::size_t>(i)].token_position;
    if (p < 0 || !positions.insert(p).second) fail("node " + std::to_string(i) + ": token_position " + std::to_string(p) + " invalid or shared");
  }

  for (EdgeType t : kEdgeTypes) {
    const auto tn = std::string(edge_type_name(t));
    const auto& adj = g.adjacency[static_cast<std::size_t>(t)];
    if (static_cast<Index>(adj.size()) != n) {
      fail(tn + ": adjacency covers " + std::to_string(adj.size()) + " of " + std::to_string(n) + " nodes");
      continue;
    }
    for (Index a = 0; a < n; ++a) {
      for (const auto& nb : adj[static_cast<std::size_t>(a)]) {
        const std::string where = tn + " edge " + std::to_string(a) + "-" + std::to_string(nb.node);
        if (nb.node < 0 || nb.node >= n) {
          fail(where + ": endpoint out of range");
          continue;
        }
        if (nb.node == a) fail(where + ": self-edge");
        const auto& back = adj[static_cast<std::size_t>(nb.node)];
        auto it = std::find_if(back.begin(), back.end(), [a](const Neighbor& x) { return x.node == a; });
        if (it == back.end() || it->weight != nb.weight) fail(where + ": asymmetric adjacency");
        if (a > nb.node) continue;  // report each undirected edge once below
        if (!kinds_match(t, g.nodes[static_cast<std::size_t>(a)].kind, g.nodes[static_cast<std::size_t>(nb.node)].kind)) {
          fail(where + ": endpoint kinds do not match the edge type");
        }
        const double w = nb.weight;
        bool in_range = std::isfinite(w);
        switch (t) {
          case EdgeType::WO:
          case EdgeType::DS:
          case EdgeType::SW: in_range = in_range && w == 1.0; break;
          case EdgeType::DD: in_range = in_range && w >= 0.0 && w <= 1.0; break;
          case EdgeType::SS:
          case EdgeType::WE: in_range = in_range && w >= -1.0 && w <= 1.0; break;
        }
        if (!in_range) fail(where + ": weight " + fmt_weight(w) + " out of range");
      }
    }
  }

  const auto& ds = g.adjacency[static_cast<std::size_t>(EdgeType::DS)];
  const auto& sw = g.adjacency[static_cast<std::size_t>(EdgeType::SW)];
  const auto& dd = g.adjacency[static_cast<std::size_t>(EdgeType::DD)];
  const std::size_t n_docs = g.count(NodeKind::Document);
  for (Index i = 0; i < n; ++i) {
    const auto kind = g.nodes[static_cast<std::size_t>(i)].kind;
    const auto idx = static_cast<std::size_t>(i);
    if (kind == NodeKind::Sentence && ds.size() == static_cast<std::size_t>(n) && ds[idx].size() != 1) {
      fail("sentence node " + std::to_string(i) + " has " + std::to_string(ds[idx].size()) + " DS edges");
    }
    if (kind == NodeKind::Word && sw.size() == static_cast<std::size_t>(n) && sw[idx].size() != 1) {
      fail("word node " + std::to_string(i) + " has " + std::to_string(sw[idx].size()) + " SW edges");
    }
    if (kind == NodeKind::Document && dd.size() == static_cast<std::size_t>(n) && dd[idx].size() != n_docs - 1) {
      fail("document node " + std::to_string(i) + " has " + std::to_string(dd[idx].size()) + " DD edges; expected " +
           std::to_string(n_docs - 1));
    }
  }

  if (n > 0) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<Index> q;
    q.push(0);
    seen[0] = 1;
    Index reached = 1;
    while (!q.empty()) {
      Index a = q.front();
      q.pop();
      for (const auto& adj : g.adjacency) {
        if (static_cast<Index>(adj.size()) != n) continue;
        for (const auto& nb : adj[static_cast<std::size_t>(a)]) {
          if (nb.node >= 0 && nb.node < n && !seen[static_cast<std::size_t>(nb.node)]) {
            seen[static_cast<std::size_t>(nb.node)] = 1;
            ++reached;
            q.push(nb.node);
          }
        }
      }
    }
    if (reached != n) fail("graph is disconnected: " + std::to_string(reached) + " of " + std::to_string(n) + " nodes reachable");
  }
  return r;
}

std::string to_dot(const HeteroGraph& g) {
  std::ostringstream os;
  os << "graph \"" << g.cluster_id << "\" {\n";
  for (Index i = 0; i < g.num_nodes(); ++i) {
    const auto& node = g.nodes[static_cast<std::size_t>(i)];
    const char* shape = node.kind == NodeKind::Document ? "triangle" : node.kind == NodeKind::Sentence ? "box" : "ellipse";
    char prefix = node.kind == NodeKind::Document ? 'D' : node.kind == NodeKind::Sentence ? 'S' : 'W';
    os << "  n" << i << " [label=\"" << prefix << node.index << "\", shape=" << shape << "];\n";
  }
  for (EdgeType t : kEdgeTypes) {
    for (const auto& e : g.edges(t)) {
      os << "  n" << e.a << " -- n" << e.b << " [type=\"" << edge_type_name(t) << "\", weight=\"" << fmt_weight(e.weight)
         << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

std::string to_json(const HeteroGraph& g) {
  nlohmann::json j;
  j["cluster_id"] = g.cluster_id;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (Index i = 0; i < g.num_nodes(); ++i) {
    const auto& node = g.nodes[static_cast<std::size_t>(i)];
    nlohmann::json n = {{"id", i}, {"kind", node_kind_name(node.kind)}, {"index", node.index}, {"token_position", node.token_position}};
    if (node.doc) n["doc"] = *node.doc;
    if (node.sent) n["sent"] = *node.sent;
    if (node.token) n["token"] = *node.token;
    nodes.push_back(std::move(n));
  }
  auto& edges = j["edges"] = nlohmann::json::object();
  auto& counts = j["edge_counts"] = nlohmann::json::object();
  for (EdgeType t : kEdgeTypes) {
    auto list = nlohmann::json::array();
    for (const auto& e : g.edges(t)) list.push_back({e.a, e.b, e.weight});
    counts[std::string(edge_type_name(t))] = list.size();
    edges[std::string(edge_type_name(t))] = std::move(list);
  }
  j["node_counts"] = {{"document", g.count(NodeKind::Document)},
                      {"sentence", g.count(NodeKind::Sentence)},
                      {"word", g.count(NodeKind::Word)}};
  return j.dump(2);
}

}  // namespace hgsum
