#include "hgsum/rouge.hpp"

#include "hgsum/errors.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace hgsum {

RougeScore make_rouge_score(double precision, double recall) {
  RougeScore s{precision, recall, 0.0};
  if (precision + recall > 0.0) s.f1 = 2.0 * precision * recall / (precision + recall);
  return s;
}

namespace {

std::map<TokenList, std::size_t> ngram_counts(const TokenList& tokens, int n) {
  std::map<TokenList, std::size_t> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    ++counts[TokenList(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return counts;
}

}  // namespace

RougeScore rouge_n(const TokenList& candidate, const TokenList& reference, int n) {
  if (n != 1 && n != 2) throw ConfigError("rouge_n: n must be 1 or 2, got " + std::to_string(n));
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  if (cand.empty() || ref.empty()) return {};
  std::size_t cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [g, c] : cand) cand_total += c;
  for (const auto& [g, c] : ref) {
    ref_total += c;
    auto it = cand.find(g);
    if (it != cand.end()) overlap += std::min(c, it->second);
  }
  return make_rouge_score(static_cast<double>(overlap) / static_cast<double>(cand_total),
                          static_cast<double>(overlap) / static_cast<double>(ref_total));
}

std::vector<std::size_t> lcs_indices(const TokenList& ref, const TokenList& cand) {
  const std::size_t rows = ref.size(), cols = cand.size();
  std::vector<std::vector<std::size_t>> t(rows + 1, std::vector<std::size_t>(cols + 1, 0));
  for (std::size_t i = 1; i <= rows; ++i) {
    for (std::size_t j = 1; j <= cols; ++j) {
      t[i][j] = ref[i - 1] == cand[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  std::vector<std::size_t> hits;
  std::size_t i = rows, j = cols;
  while (i > 0 && j > 0) {
    if (ref[i - 1] == cand[j - 1]) {
      hits.push_back(i - 1);
      --i;
      --j;
    } else if (t[i][j - 1] > t[i - 1][j]) {
      --j;
    } else {
      --i;
    }
  }
  std::reverse(hits.begin(), hits.end());
  return hits;
}

RougeScore rouge_l_summary(const std::vector<TokenList>& candidate, const std::vector<TokenList>& reference) {
  std::size_t m = 0, n = 0;
  std::map<std::string, std::size_t> ref_counts, cand_counts;
  for (const auto& s : reference) {
    m += s.size();
    for (const auto& t : s) ++ref_counts[t];
  }
  for (const auto& s : candidate) {
    n += s.size();
    for (const auto& t : s) ++cand_counts[t];
  }
  if (m == 0 || n == 0) return {};
  std::size_t hits = 0;
  for (const auto& r : reference) {
    std::set<std::size_t> uni;
    for (const auto& c : candidate) {
      for (std::size_t idx : lcs_indices(r, c)) uni.insert(idx);
    }
    for (std::size_t idx : uni) {
      const std::string& tok = r[idx];
      auto& cc = cand_counts[tok];
      auto& rc = ref_counts[tok];
      if (cc > 0 && rc > 0) {
        ++hits;
        --cc;
        --rc;
      }
    }
  }
  return make_rouge_score(static_cast<double>(hits) / static_cast<double>(n),
                          static_cast<double>(hits) / static_cast<double>(m));
}

double rouge_avg_f1(const std::vector<TokenList>& a, const std::vector<TokenList>& b) {
  TokenList fa = flatten(a), fb = flatten(b);
  double r1 = rouge_n(fa, fb, 1).f1;
  double r2 = rouge_n(fa, fb, 2).f1;
  double rl = rouge_l_summary(a, b).f1;
  return (r1 + r2 + rl) / 3.0;
}

TokenList rouge_tokens(const Sentence& sentence) {
  TokenList out;
  for (const auto& t : sentence.tokens) {
    bool alnum = std::any_of(t.begin(), t.end(), [](char c) {
      auto u = static_cast<unsigned char>(c);
      return u >= 128 || std::isalnum(u) != 0;
    });
    if (alnum) out.push_back(t);
  }
  return out;
}

std::vector<TokenList> rouge_sentences(const std::vector<Sentence>& sentences) {
  std::vector<TokenList> out;
  for (const auto& s : sentences) {
    auto t = rouge_tokens(s);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

TokenList flatten(const std::vector<TokenList>& sentences) {
  TokenList out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace hgsum
