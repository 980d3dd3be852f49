#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hypermatch {

using TokenSeq = std::vector<std::string>;

struct Document {
  std::string id;
  TokenSeq tokens;
  std::vector<TokenSeq> gold;
};

enum class Label { unlabeled, positive, negative };

struct Candidate {
  std::size_t start = 0;
  std::size_t length = 0;
  TokenSeq surface;
  TokenSeq stemmed;
  Label label = Label::unlabeled;
};

/// Number of n-grams before deduplication, sum over n of max(0, M - n + 1).
std::size_t ngram_count(std::size_t tokens, std::size_t max_length);

/// Every n-gram with n <= max_length, deduplicated by stemmed form (earliest
/// occurrence kept), ordered by start and then length.
std::vector<Candidate> extract_candidates(const Document& doc, std::size_t max_length);

/// Marks a candidate positive iff its stemmed sequence equals the stemmed
/// sequence of some gold phrase; everything else becomes negative.
std::vector<Candidate> label_candidates(std::vector<Candidate> cands, const std::vector<TokenSeq>& gold);

/// Space-joined stemmed form, the dedup and matching key.
std::string stem_key(const TokenSeq& stemmed);

}  // namespace hypermatch
