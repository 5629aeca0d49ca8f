#include "hgsum/hetgraph.hpp"

#include <algorithm>
#include <array>
#include <string_view>

namespace hgsum {

namespace {

// Closed-class words plus frequent verbs and adverbs; kept sorted.
constexpr std::array kStopwords = std::to_array<std::string_view>({
    "a",         "about",     "above",    "across",   "after",      "afterwards", "again",     "against",
    "ago",       "all",       "almost",   "along",    "already",    "also",       "although",  "always",
    "am",        "among",     "an",       "and",      "another",    "any",        "anybody",   "anyone",
    "anything",  "anyway",    "are",      "around",   "as",         "asked",      "at",        "away",
    "back",      "be",        "became",   "because",  "become",     "been",       "before",    "began",
    "begin",     "behind",    "being",    "below",    "beside",     "besides",    "between",   "beyond",
    "both",      "brought",   "but",      "by",       "called",     "came",       "can",       "cannot",
    "could",     "did",       "do",       "does",     "doing",      "done",       "down",      "during",
    "each",      "either",    "else",     "elsewhere", "enough",    "even",       "ever",      "every",
    "everyone",  "everything", "except",  "far",      "felt",       "few",        "fled",      "for",
    "found",     "from",      "further",  "gave",     "get",        "gets",       "getting",   "give",
    "given",     "go",        "goes",     "going",    "gone",       "got",        "had",       "has",
    "have",      "having",    "he",       "hence",    "her",        "here",       "hers",      "herself",
    "him",       "himself",   "his",      "how",      "however",    "i",          "if",        "in",
    "inside",    "into",      "is",       "it",       "its",        "itself",     "just",      "keep",
    "kept",      "knew",      "know",     "known",    "last",       "later",      "least",     "left",
    "less",      "let",       "like",     "made",     "make",       "makes",      "making",    "many",
    "may",       "me",        "meanwhile", "might",   "mine",       "more",       "moreover",  "most",
    "mostly",    "much",      "must",     "my",       "myself",     "near",       "nearly",    "neither",
    "never",     "nevertheless", "next",  "no",       "nobody",     "none",       "nor",       "not",
    "nothing",   "now",       "nowhere",  "of",       "off",        "often",      "on",        "once",
    "one",       "only",      "onto",     "or",       "other",      "others",     "otherwise", "our",
    "ours",      "ourselves", "out",      "outside",  "over",       "own",        "per",       "perhaps",
    "put",       "quite",     "rather",   "really",   "said",       "same",       "saw",       "say",
    "saying",    "says",      "see",      "seem",     "seemed",     "seems",      "seen",      "several",
    "shall",     "she",       "should",   "show",     "showed",     "shown",      "since",     "so",
    "some",      "somehow",   "someone",  "something", "sometimes", "somewhere",  "soon",      "still",
    "such",      "take",      "taken",    "takes",    "than",       "that",       "the",       "their",
    "theirs",    "them",      "themselves", "then",   "there",      "thereby",    "therefore", "these",
    "they",      "this",      "those",    "though",   "thought",    "through",    "throughout", "thus",
    "to",        "today",     "together", "told",     "too",        "took",       "toward",    "towards",
    "under",     "unless",    "until",    "up",       "upon",       "us",         "use",       "used",
    "very",      "via",       "was",      "we",       "well",       "went",       "were",      "what",
    "whatever",  "when",      "whenever", "where",    "whereas",    "wherever",   "whether",   "which",
    "while",     "who",       "whoever",  "whole",    "whom",       "whose",      "why",       "will",
    "with",      "within",    "without",  "would",    "yesterday",  "yet",        "you",       "your",
    "yours",     "yourself",  "yourselves",
});

}  // namespace

bool is_stopword(std::string_view token) {
  return std::binary_search(kStopwords.begin(), kStopwords.end(), token);
}

std::size_t stopword_count() { return kStopwords.size(); }

std::span<const std::string_view> stopword_list() { return kStopwords; }

}  // namespace hgsum
