#include "hgsum/embeddings.hpp"

#include "hgsum/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hgsum {

EmbeddingTable::EmbeddingTable(std::size_t dimension, std::unordered_map<std::string, Vector> vectors)
    : dimension_(dimension), vectors_(std::move(vectors)), unk_(Vector::Zero(static_cast<Index>(dimension))) {
  for (const auto& [tok, v] : vectors_) {
    if (static_cast<std::size_t>(v.size()) != dimension_) throw DataError("embedding for '" + tok + "' has wrong dimension");
    unk_ += v;
  }
  if (!vectors_.empty()) unk_ /= static_cast<double>(vectors_.size());
}

const Vector& EmbeddingTable::lookup(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? unk_ : it->second;
}

EmbeddingTable load_static_embeddings(const std::string& path, std::size_t dimension, EmbeddingLoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path + "'");
  std::unordered_map<std::string, Vector> vectors;
  EmbeddingLoadStats local;
  std::string line;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    fields.clear();
    for (std::string f; ss >> f;) fields.push_back(std::move(f));
    if (fields.empty()) continue;
    if (fields.size() != dimension + 1) {
      ++local.skipped;
      continue;
    }
    Vector v(static_cast<Index>(dimension));
    bool ok = true;
    for (std::size_t i = 0; i < dimension && ok; ++i) {
      const std::string& f = fields[i + 1];
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      ok = ec == std::errc() && ptr == f.data() + f.size();
      v(static_cast<Index>(i)) = x;
    }
    if (!ok) {
      ++local.skipped;
      continue;
    }
    vectors[fields[0]] = std::move(v);
    ++local.loaded;
  }
  if (vectors.empty()) {
    throw DataError("embeddings '" + path + "' contain no valid " + std::to_string(dimension) + "-dimensional vectors");
  }
  local.loaded = vectors.size();
  if (stats) *stats = local;
  return EmbeddingTable(dimension, std::move(vectors));
}

double cosine(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) {
    throw DataError("cosine: length mismatch " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  double nu = u.norm();
  double nv = v.norm();
  if (nu < 1e-12 || nv < 1e-12) return 0.0;
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

Vector sentence_embedding(const Sentence& sentence, const EmbeddingTable& table) {
  if (sentence.tokens.empty()) throw DataError("sentence_embedding: empty sentence");
  Vector acc = Vector::Zero(static_cast<Index>(table.dimension()));
  for (const auto& t : sentence.tokens) acc += table.lookup(t);
  return acc / static_cast<double>(sentence.tokens.size());
}

std::size_t SentenceEmbedder::dimension() const {
  return mode_ == Mode::Precomputed ? precomputed_.dimension() : table_->dimension();
}

Vector SentenceEmbedder::embed(const Sentence& sentence, const std::string& cluster_id, std::size_t doc,
                               std::size_t sent) const {
  if (mode_ == Mode::MeanOfWords) return sentence_embedding(sentence, *table_);
  std::string key = cluster_id + ":" + std::to_string(doc) + ":" + std::to_string(sent);
  if (!precomputed_.contains(key)) throw DataError("no precomputed sentence embedding for key '" + key + "'");
  return precomputed_.lookup(key);
}

}  // namespace hgsum
