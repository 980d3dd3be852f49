#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypermatch/candidates.hpp"

namespace hypermatch {

inline const std::vector<std::size_t> kDefaultEvalKs = {1, 3, 5, 10};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct DocumentScores {
  std::size_t index = 0;
  std::vector<Scores> at_k;  // parallel to EvalReport::ks
};

struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<Scores> macro;  // parallel to ks
  std::size_t num_docs = 0;
  std::size_t num_excluded = 0;
  std::vector<DocumentScores> documents;

  const Scores& at(std::size_t k) const;
};

/// Scores for one document. `predicted` holds ranked, already-deduplicated
/// stem keys; `gold` holds distinct stem keys and must be non-empty.
Scores score_at_k(const std::vector<std::string>& predicted, const std::vector<std::string>& gold, std::size_t k);

/// Macro averages over documents; predictions and gold are token sequences
/// that get stemmed here. Documents with empty gold are excluded and counted.
EvalReport evaluate(const std::vector<std::vector<TokenSeq>>& predictions, const std::vector<std::vector<TokenSeq>>& gold,
                    const std::vector<std::size_t>& ks = kDefaultEvalKs);

nlohmann::json to_json(const EvalReport& report);
std::string format_table(const EvalReport& report);

}  // namespace hypermatch
