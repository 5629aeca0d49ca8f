#pragma once

#include "hgsum/corpus.hpp"

#include <Eigen/Core>

#include <string>
#include <unordered_map>

namespace hgsum {

using Vector = Eigen::VectorXd;

// Static word vectors. Immutable after load; lookups of absent tokens return
// the mean of all loaded vectors.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t dimension, std::unordered_map<std::string, Vector> vectors);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& token) const { return vectors_.count(token) > 0; }
  const Vector& lookup(const std::string& token) const;
  const Vector& unk_vector() const { return unk_; }

 private:
  std::size_t dimension_ = 0;
  std::unordered_map<std::string, Vector> vectors_;
  Vector unk_;
};

struct EmbeddingLoadStats {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
};

// Lines "token v1 ... vd". Lines with the wrong arity or non-numeric fields are
// skipped and counted; zero valid lines is a DataError.
EmbeddingTable load_static_embeddings(const std::string& path, std::size_t dimension,
                                      EmbeddingLoadStats* stats = nullptr);

// Throws DataError on length mismatch; 0 when either norm < 1e-12.
double cosine(const Vector& u, const Vector& v);

class SentenceEmbedder {
 public:
  enum class Mode { MeanOfWords, Precomputed };

  // Mean of the table's token vectors.
  explicit SentenceEmbedder(const EmbeddingTable& table) : table_(&table) {}
  // Vectors keyed by "clusterId:docIdx:sentIdx", same file format as word vectors.
  SentenceEmbedder(const EmbeddingTable& table, EmbeddingTable precomputed)
      : table_(&table), precomputed_(std::move(precomputed)), mode_(Mode::Precomputed) {}

  Mode mode() const { return mode_; }
  std::size_t dimension() const;
  Vector embed(const Sentence& sentence, const std::string& cluster_id, std::size_t doc, std::size_t sent) const;

 private:
  const EmbeddingTable* table_;
  EmbeddingTable precomputed_;
  Mode mode_ = Mode::MeanOfWords;
};

Vector sentence_embedding(const Sentence& sentence, const EmbeddingTable& table);

}  // namespace hgsum
