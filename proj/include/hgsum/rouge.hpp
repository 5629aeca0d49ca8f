#pragma once

#include "hgsum/corpus.hpp"

#include <string>
#include <vector>

namespace hgsum {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

RougeScore make_rouge_score(double precision, double recall);

using TokenList = std::vector<std::string>;

// Clipped n-gram overlap. n must be 1 or 2.
RougeScore rouge_n(const TokenList& candidate, const TokenList& reference, int n);

// Longest-common-subsequence hit positions in `ref`, backtracked from the end
// preferring matches, then the candidate side when strictly longer.
std::vector<std::size_t> lcs_indices(const TokenList& ref, const TokenList& cand);

// Summary-level ROUGE-L: per reference sentence, the union of its LCS hits
// against every candidate sentence, with clipped token credit.
RougeScore rouge_l_summary(const std::vector<TokenList>& candidate, const std::vector<TokenList>& reference);

// Mean F1 of ROUGE-1, ROUGE-2 and summary-level ROUGE-L.
double rouge_avg_f1(const std::vector<TokenList>& a, const std::vector<TokenList>& b);

// Lowercased tokens that carry at least one alphanumeric character.
TokenList rouge_tokens(const Sentence& sentence);
std::vector<TokenList> rouge_sentences(const std::vector<Sentence>& sentences);
TokenList flatten(const std::vector<TokenList>& sentences);

}  // namespace hgsum
