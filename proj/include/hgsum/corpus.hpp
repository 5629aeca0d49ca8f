#pragma once

#include "hgsum/value.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hgsum {

struct Sentence {
  std::vector<std::string> tokens;    // lowercased
  std::vector<std::string> original;  // as written
  std::pair<std::size_t, std::size_t> char_span{0, 0};
  // Optional per-token POS tags supplied by the dataset.
  std::vector<std::string> pos;
};

struct Document {
  std::vector<Sentence> sentences;
};

struct DocumentCluster {
  std::string id;
  std::vector<Document> documents;
  std::optional<std::vector<Sentence>> summary;
};

// Splits on . ! ? followed by whitespace; tokens split on whitespace with
// leading/trailing punctuation detached.
std::vector<Sentence> tokenize(std::string_view text);

// One cluster per line: {"id": str, "documents": [str], "summary": str}.
// Optional "pos": per document, per sentence tag lists; "summary_pos" likewise
// for the summary. Records with no usable documents are skipped and reported
// through `warnings`.
std::vector<DocumentCluster> load_clusters(const std::string& path, std::optional<std::size_t> limit = std::nullopt,
                                           std::vector<std::string>* warnings = nullptr);
DocumentCluster parse_cluster_record(const std::string& line, std::size_t line_no);

// The summary as a one-document cluster, id "<id>/summary".
DocumentCluster summary_as_cluster(const DocumentCluster& cluster);

inline constexpr Index kPad = 0;
inline constexpr Index kUnk = 1;
inline constexpr Index kBos = 2;
inline constexpr Index kEos = 3;
inline constexpr Index kSentSep = 4;
inline constexpr Index kDocSep = 5;
inline constexpr Index kNumReserved = 6;

class Vocab {
 public:
  Vocab();
  explicit Vocab(const std::vector<std::string>& tokens_after_reserved);

  Index id(const std::string& token) const;
  const std::string& token(Index id) const;
  Index size() const { return static_cast<Index>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool is_reserved(Index id) const { return id >= 0 && id < kNumReserved; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, Index> ids_;
};

// Counts lowercased tokens of documents and summaries; keeps those seen at
// least `min_freq` times, ordered by frequency then lexicographically.
Vocab build_vocab(const std::vector<DocumentCluster>& clusters, std::size_t min_freq);

struct SentenceBoundary {
  std::size_t doc = 0;
  std::size_t sent = 0;
  Index sep_pos = 0;      // SENT_SEP position
  Index token_begin = 0;  // first token position
  Index token_end = 0;    // one past the last token
};

struct BoundaryIndex {
  std::vector<Index> doc_sep;  // per document
  std::vector<SentenceBoundary> sentences;
  Index length = 0;
};

// Layout positions for a cluster: DOC_SEP, then per sentence its tokens and
// SENT_SEP. Does not truncate.
BoundaryIndex layout_boundaries(const DocumentCluster& cluster);

// Drops trailing sentences (and documents left empty) so the layout fits in
// `max_len`. Throws DataError when nothing fits.
DocumentCluster truncate_to_budget(const DocumentCluster& cluster, std::size_t max_len);

struct EncoderInput {
  std::vector<Index> ids;
  BoundaryIndex boundaries;
};

// Requires max_len >= 16. Truncates with `truncate_to_budget` first.
EncoderInput serialize_encoder_input(const DocumentCluster& cluster, const Vocab& vocab, std::size_t max_len);

std::vector<Index> encode_tokens(const std::vector<Sentence>& sentences, const Vocab& vocab);
// Drops reserved ids and joins with single spaces.
std::string detokenize(std::span<const Index> ids, const Vocab& vocab);

}  // namespace hgsum
