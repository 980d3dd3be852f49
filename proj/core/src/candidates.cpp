#include "hypermatch/candidates.hpp"

#include <unordered_set>

#include "hypermatch/error.hpp"
#include "hypermatch/porter.hpp"

namespace hypermatch {

std::size_t ngram_count(std::size_t tokens, std::size_t max_length) {
  std::size_t total = 0;
  for (std::size_t n = 1; n <= max_length && n <= tokens; ++n) total += tokens - n + 1;
  return total;
}

std::string stem_key(const TokenSeq& stemmed) {
  std::string key;
  for (std::size_t i = 0; i < stemmed.size(); ++i) {
    if (i > 0) key.push_back(' ');
    key += stemmed[i];
  }
  return key;
}

std::vector<Candidate> extract_candidates(const Document& doc, std::size_t max_length) {
  if (max_length == 0) throw InvalidArgument("extract_candidates: max_length must be >= 1");
  const TokenSeq stems = stem_tokens(doc.tokens);
  const std::size_t m = doc.tokens.size();
  std::vector<Candidate> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t n = 1; n <= max_length && i + n <= m; ++n) {
      Candidate c;
      c.start = i;
      c.length = n;
      c.surface.assign(doc.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       doc.tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
      c.stemmed.assign(stems.begin() + static_cast<std::ptrdiff_t>(i), stems.begin() + static_cast<std::ptrdiff_t>(i + n));
      if (!seen.insert(stem_key(c.stemmed)).second) continue;
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<Candidate> label_candidates(std::vector<Candidate> cands, const std::vector<TokenSeq>& gold) {
  std::unordered_set<std::string> keys;
  for (const auto& g : gold) keys.insert(stem_key(stem_tokens(g)));
  for (auto& c : cands) c.label = keys.contains(stem_key(c.stemmed)) ? Label::positive : Label::negative;
  return cands;
}

}  // namespace hypermatch
