#include "hgsum/corpus.hpp"

#include "hgsum/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <unordered_map>

namespace hgsum {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u) != 0;
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    auto u = static_cast<unsigned char>(c);
    if (u < 128) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

void split_chunk(std::string_view chunk, std::vector<std::string>& out) {
  if (std::all_of(chunk.begin(), chunk.end(), is_punct)) {
    out.emplace_back(chunk);
    return;
  }
  std::size_t b = 0, e = chunk.size();
  while (b < e && is_punct(chunk[b])) out.emplace_back(1, chunk[b++]);
  std::size_t tail = e;
  while (tail > b && is_punct(chunk[tail - 1])) --tail;
  out.emplace_back(chunk.substr(b, tail - b));
  for (std::size_t i = tail; i < e; ++i) out.emplace_back(1, chunk[i]);
}

std::optional<Sentence> make_sentence(std::string_view text, std::size_t begin, std::size_t end) {
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  if (begin == end) return std::nullopt;
  Sentence s;
  s.char_span = {begin, end};
  std::size_t i = begin;
  while (i < end) {
    while (i < end && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < end && !is_space(text[j])) ++j;
    if (j > i) split_chunk(text.substr(i, j - i), s.original);
    i = j;
  }
  s.tokens.reserve(s.original.size());
  for (const auto& t : s.original) s.tokens.push_back(lower(t));
  return s;
}

std::vector<Sentence> sentences_with_pos(const std::string& text, const nlohmann::json* pos, const std::string& where) {
  std::vector<Sentence> sents = tokenize(text);
  if (pos == nullptr) return sents;
  if (!pos->is_array()) throw DataError(where + ": pos annotations must be an array of per-sentence tag lists");
  for (std::size_t s = 0; s < sents.size() && s < pos->size(); ++s) {
    const auto& tags = (*pos)[s];
    if (!tags.is_array()) throw DataError(where + ": pos annotations must be an array of per-sentence tag lists");
    for (const auto& t : tags) sents[s].pos.push_back(t.get<std::string>());
  }
  return sents;
}

}  // namespace

std::vector<Sentence> tokenize(std::string_view text) {
  std::vector<Sentence> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_terminal(text[i]) && i + 1 < text.size() && is_space(text[i + 1])) {
      if (auto s = make_sentence(text, start, i + 1)) out.push_back(std::move(*s));
      start = i + 1;
    }
  }
  if (auto s = make_sentence(text, start, text.size())) out.push_back(std::move(*s));
  return out;
}

DocumentCluster parse_cluster_record(const std::string& line, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no);
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(where + ": malformed record: " + e.what());
  }
  if (!rec.is_object()) throw DataError(where + ": record is not an object");
  if (!rec.contains("id") || !rec["id"].is_string()) throw DataError(where + ": missing string field 'id'");
  if (!rec.contains("documents") || !rec["documents"].is_array()) {
    throw DataError(where + ": missing array field 'documents'");
  }
  DocumentCluster cluster;
  cluster.id = rec["id"].get<std::string>();
  const nlohmann::json* doc_pos = rec.contains("pos") ? &rec["pos"] : nullptr;
  if (doc_pos && (!doc_pos->is_array() || doc_pos->size() != rec["documents"].size())) {
    throw DataError(where + ": 'pos' must hold one entry per document");
  }
  std::size_t di = 0;
  for (const auto& d : rec["documents"]) {
    if (!d.is_string()) throw DataError(where + ": documents must be strings");
    Document doc;
    doc.sentences = sentences_with_pos(d.get<std::string>(), doc_pos ? &(*doc_pos)[di] : nullptr, where);
    if (!doc.sentences.empty()) cluster.documents.push_back(std::move(doc));
    ++di;
  }
  if (rec.contains("summary") && !rec["summary"].is_null()) {
    if (!rec["summary"].is_string()) throw DataError(where + ": 'summary' must be a string");
    const nlohmann::json* sum_pos = rec.contains("summary_pos") ? &rec["summary_pos"] : nullptr;
    auto sents = sentences_with_pos(rec["summary"].get<std::string>(), sum_pos, where);
    if (!sents.empty()) cluster.summary = std::move(sents);
  }
  return cluster;
}

std::vector<DocumentCluster> load_clusters(const std::string& path, std::optional<std::size_t> limit,
                                           std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::vector<DocumentCluster> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (limit && out.size() >= *limit) break;
    if (std::all_of(line.begin(), line.end(), is_space)) continue;
    DocumentCluster c;
    try {
      c = parse_cluster_record(line, line_no);
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
    if (c.documents.empty()) {
      std::string msg = path + ": line " + std::to_string(line_no) + ": cluster '" + c.id + "' has no documents; skipped";
      std::cerr << "warning: " << msg << '\n';
      if (warnings) warnings->push_back(std::move(msg));
      continue;
    }
    out.push_back(std::move(c));
  }
  return out;
}

DocumentCluster summary_as_cluster(const DocumentCluster& cluster) {
  if (!cluster.summary || cluster.summary->empty()) {
    throw DataError("cluster '" + cluster.id + "' has no summary");
  }
  DocumentCluster z;
  z.id = cluster.id + "/summary";
  z.documents.push_back(Document{*cluster.summary});
  return z;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& tokens_after_reserved) {
  tokens_ = {"<pad>", "<unk>", "<s>", "</s>", "<sent-sep>", "<doc-sep>"};
  for (Index i = 0; i < kNumReserved; ++i) ids_[tokens_[i]] = i;
  for (const auto& t : tokens_after_reserved) {
    if (ids_.count(t)) continue;
    ids_[t] = static_cast<Index>(tokens_.size());
    tokens_.push_back(t);
  }
}

Index Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(Index id) const {
  if (id < 0 || id >= size()) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

Vocab build_vocab(const std::vector<DocumentCluster>& clusters, std::size_t min_freq) {
  std::unordered_map<std::string, std::size_t> counts;
  auto count = [&](const std::vector<Sentence>& sents) {
    for (const auto& s : sents)
      for (const auto& t : s.tokens) ++counts[t];
  };
  for (const auto& c : clusters) {
    for (const auto& d : c.documents) count(d.sentences);
    if (c.summary) count(*c.summary);
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocab(tokens);
}

BoundaryIndex layout_boundaries(const DocumentCluster& cluster) {
  BoundaryIndex b;
  Index pos = 0;
  for (std::size_t d = 0; d < cluster.documents.size(); ++d) {
    b.doc_sep.push_back(pos++);
    const auto& sents = cluster.documents[d].sentences;
    for (std::size_t s = 0; s < sents.size(); ++s) {
      SentenceBoundary sb;
      sb.doc = d;
      sb.sent = s;
      sb.token_begin = pos;
      pos += static_cast<Index>(sents[s].tokens.size());
      sb.token_end = pos;
      sb.sep_pos = pos++;
      b.sentences.push_back(sb);
    }
  }
  b.length = pos;
  return b;
}

DocumentCluster truncate_to_budget(const DocumentCluster& cluster, std::size_t max_len) {
  DocumentCluster out;
  out.id = cluster.id;
  out.summary = cluster.summary;
  std::size_t used = 0;
  bool full = false;
  for (const auto& doc : cluster.documents) {
    if (full) break;
    Document kept;
    for (const auto& s : doc.sentences) {
      std::size_t need = s.tokens.size() + 1 + (kept.sentences.empty() ? 1 : 0);
      if (used + need > max_len) {
        full = true;
        break;
      }
      used += need;
      kept.sentences.push_back(s);
    }
    if (!kept.sentences.empty()) out.documents.push_back(std::move(kept));
  }
  if (out.documents.empty()) {
    throw DataError("cluster '" + cluster.id + "' has no sentence that fits in " + std::to_string(max_len) +
                    " input positions");
  }
  return out;
}

EncoderInput serialize_encoder_input(const DocumentCluster& cluster, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 16) throw ConfigError("max input length must be at least 16, got " + std::to_string(max_len));
  DocumentCluster kept = truncate_to_budget(cluster, max_len);
  EncoderInput in;
  in.boundaries = layout_boundaries(kept);
  in.ids.reserve(static_cast<std::size_t>(in.boundaries.length));
  for (const auto& doc : kept.documents) {
    in.ids.push_back(kDocSep);
    for (const auto& s : doc.sentences) {
      for (const auto& t : s.tokens) in.ids.push_back(vocab.id(t));
      in.ids.push_back(kSentSep);
    }
  }
  return in;
}

std::vector<Index> encode_tokens(const std::vector<Sentence>& sentences, const Vocab& vocab) {
  std::vector<Index> ids;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) ids.push_back(vocab.id(t));
  return ids;
}

std::string detokenize(std::span<const Index> ids, const Vocab& vocab) {
  std::string out;
  for (Index id : ids) {
    if (vocab.is_reserved(id)) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

}  // namespace hgsum
