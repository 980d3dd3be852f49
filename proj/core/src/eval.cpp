#include "hypermatch/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include "hypermatch/error.hpp"
#include "hypermatch/porter.hpp"

namespace hypermatch {

const Scores& EvalReport::at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return macro[i];
  }
  throw NotFound("evaluation report has no K = " + std::to_string(k));
}

Scores score_at_k(const std::vector<std::string>& predicted, const std::vector<std::string>& gold, std::size_t k) {
  if (gold.empty()) throw InvalidArgument("score_at_k: empty gold set");
  if (k == 0) throw InvalidArgument("score_at_k: K must be >= 1");
  const std::unordered_set<std::string> truth(gold.begin(), gold.end());
  const std::size_t top = std::min(k, predicted.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += truth.contains(predicted[i]) ? 1 : 0;
  Scores s;
  s.precision = top == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(top);
  s.recall = static_cast<double>(hits) / static_cast<double>(truth.size());
  const double pr = s.precision + s.recall;
  s.f1 = pr == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / pr;
  return s;
}

namespace {

std::vector<std::string> distinct_keys(const std::vector<TokenSeq>& phrases) {
  std::vector<std::string> keys;
  std::unordered_set<std::string> seen;
  for (const auto& p : phrases) {
    std::string key = stem_key(stem_tokens(p));
    if (key.empty()) continue;
    if (seen.insert(key).second) keys.push_back(std::move(key));
  }
  return keys;
}

}  // namespace

EvalReport evaluate(const std::vector<std::vector<TokenSeq>>& predictions, const std::vector<std::vector<TokenSeq>>& gold,
                    const std::vector<std::size_t>& ks) {
  if (predictions.size() != gold.size()) {
    throw InvalidArgument("evaluate: " + std::to_string(predictions.size()) + " prediction lists for " +
                          std::to_string(gold.size()) + " gold lists");
  }
  EvalReport report;
  report.ks = ks;
  report.macro.assign(ks.size(), Scores{});
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const auto truth = distinct_keys(gold[d]);
    if (truth.empty()) {
      ++report.num_excluded;
      continue;
    }
    const auto pred = distinct_keys(predictions[d]);
    DocumentScores row;
    row.index = d;
    for (std::size_t k : ks) row.at_k.push_back(score_at_k(pred, truth, k));
    report.documents.push_back(std::move(row));
  }
  report.num_docs = report.documents.size();
  if (report.num_docs == 0) return report;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    Scores sum;
    for (const auto& row : report.documents) {
      sum.precision += row.at_k[i].precision;
      sum.recall += row.at_k[i].recall;
      sum.f1 += row.at_k[i].f1;
    }
    const double n = static_cast<double>(report.num_docs);
    report.macro[i] = {sum.precision / n, sum.recall / n, sum.f1 / n};
  }
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    rows.push_back({{"k", report.ks[i]},
                    {"precision", report.macro[i].precision},
                    {"recall", report.macro[i].recall},
                    {"f1", report.macro[i].f1}});
  }
  return {{"metrics", rows}, {"num_docs", report.num_docs}, {"num_excluded", report.num_excluded}};
}

std::string format_table(const EvalReport& report) {
  std::string out;
  char line[96];
  std::snprintf(line, sizeof line, "%6s %10s %10s %10s\n", "K", "P@K", "R@K", "F1@K");
  out += line;
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    std::snprintf(line, sizeof line, "%6zu %10.4f %10.4f %10.4f\n", report.ks[i], report.macro[i].precision,
                  report.macro[i].recall, report.macro[i].f1);
    out += line;
  }
  std::snprintf(line, sizeof line, "documents: %zu (excluded: %zu)\n", report.num_docs, report.num_excluded);
  out += line;
  return out;
}

}  // namespace hypermatch
