// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "hypermatch/eval.hpp"
#include "hypermatch/matching.hpp"
#include "hypermatch/selfcheck.hpp"
#include "hypermatch/synth.hpp"
#include "hypermatch/training.hpp"

namespace hm = hypermatch;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome geometry() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t total = 0, failed = 0;
  std::string first_failure;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& r : hm::run_geometry_suite(hm::library_ops(), seed)) {
      ++total;
      if (!r.passed) {
        ++failed;
        if (first_failure.empty()) first_failure = r.name + ": " + r.detail;
      }
    }
  }
  const double s = seconds_since(t0) / 5.0;
  const bool ok = failed == 0 && s < 5.0;
  return {ok, fmt::format("{} property runs over 5 seeds, {} failed, {:.3f} s per suite{}", total, failed, s,
                          first_failure.empty() ? "" : "; " + first_failure)};
}

Outcome gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string worst;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = hm::run_gradient_property(seed);
    ok = ok && r.passed;
    worst += fmt::format("{}seed {}: {}", seed == 1 ? "" : "; ", seed, r.detail);
  }
  const double s = seconds_since(t0);
  return {ok && s < 60.0, fmt::format("{:.2f} s; {}", s, worst)};
}

hm::ModelConfig toy_model() {
  hm::ModelConfig c;
  c.layers = 3;
  c.hidden = 16;
  c.hyperbolic = 16;
  c.max_phrase_length = 3;
  return c;
}

hm::TrainConfig toy_training(std::uint64_t seed) {
  hm::TrainConfig t;
  t.learning_rate = 0.02;
  t.batch_size = 5;
  t.epochs = 200;
  t.weight_decay = 0.0;
  t.seed = seed;
  return t;
}

std::vector<hm::PreparedDocument> prepare(const std::vector<hm::CorpusRecord>& docs, const hm::ModelConfig& c) {
  std::vector<hm::PreparedDocument> out;
  for (const auto& d : docs) {
    out.push_back(hm::prepare_document(d, hm::synth_embeddings(d, c.layers, c.hidden, 11), c.max_phrase_length));
  }
  return out;
}

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = toy_model();
  const auto docs = prepare(hm::synth_corpus(hm::SynthCorpusConfig{}), model);
  const auto r = hm::train(model, toy_training(13), docs, {}, hm::init_parameters(model, 5));
  const double pairwise = hm::pairwise_accuracy(r.params, model, docs);
  const auto report = hm::evaluate_model(r.params, model, docs, {1, 3});
  // With g gold phrases a perfect top-1 scores P = 1, R = 1/g, F1 = 2/(1+g).
  double ceiling = 0.0;
  for (const auto& d : docs) ceiling += 2.0 / (1.0 + static_cast<double>(d.gold.size()));
  ceiling /= static_cast<double>(docs.size());
  const double s = seconds_since(t0);
  const bool ok = pairwise == 1.0 && report.at(1).f1 >= 0.95 && s < 600.0;
  return {ok, fmt::format("{} docs, {} epochs: pairwise accuracy {:.3f} (need 1.0), train F1@1 {:.3f} (need 0.95; "
                          "best attainable with this gold {:.3f}), F1@3 {:.3f}, final loss {:.5f}, {:.1f} s",
                          docs.size(), r.history.size(), pairwise, report.at(1).f1, ceiling, report.at(3).f1,
                          r.history.back().mean_loss, s)};
}

Outcome ablation() {
  const auto t0 = std::chrono::steady_clock::now();
  auto full = toy_model();
  auto euclid = toy_model();
  euclid.euclidean = true;
  const auto records = hm::synth_corpus(hm::SynthCorpusConfig{});
  const std::vector<hm::CorpusRecord> train_records(records.begin(), records.begin() + 40);
  const std::vector<hm::CorpusRecord> held_records(records.begin() + 40, records.end());
  const auto train_docs = prepare(train_records, full);
  const auto held_docs = prepare(held_records, full);

  auto held_f1 = [&](const hm::ModelConfig& model, std::uint64_t seed) {
    const auto r = hm::train(model, toy_training(seed), train_docs, {}, hm::init_parameters(model, seed));
    return hm::evaluate_model(r.params, model, held_docs, {3}).at(3).f1;
  };
  std::vector<double> diffs;
  double full_sum = 0.0, euclid_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double a = held_f1(full, seed), b = held_f1(euclid, seed);
    full_sum += a;
    euclid_sum += b;
    diffs.push_back(a - b);
  }
  const double n = static_cast<double>(diffs.size());
  const double mean_diff = (full_sum - euclid_sum) / n;
  double var = 0.0;
  for (double d : diffs) var += (d - mean_diff) * (d - mean_diff);
  const double se = std::sqrt(var / (n - 1.0) / n);
  const bool ok = mean_diff >= 0.0 || -mean_diff <= 2.0 * se;
  return {ok, fmt::format("held-out F1@3 over 5 seeds: hyperbolic {:.4f}, euclidean {:.4f}, difference {:+.4f} "
                          "(noise band 2 SE = {:.4f}), {:.1f} s",
                          full_sum / n, euclid_sum / n, mean_diff, 2.0 * se, seconds_since(t0))};
}

Outcome eval_fixture() {
  const std::vector<std::vector<hm::TokenSeq>> preds = {
      {{"a"}, {"b"}, {"c"}},
      {{"x"}, {"y", "z"}},
      {{"p"}, {"q"}, {"r"}, {"s"}, {"t"}, {"u"}, {"v"}, {"w"}, {"m"}, {"n"}, {"o"}},
  };
  const std::vector<std::vector<hm::TokenSeq>> gold = {{{"a"}, {"d"}}, {{"y", "z"}}, {{"q"}, {"w"}, {"zz"}}};
  // Per-document (P, R, F1) by hand, for K = 1, 3, 5, 10.
  const double by_hand[4][3][3] = {
      {{1.0, 1.0 / 2, 2.0 / 3}, {0, 0, 0}, {0, 0, 0}},
      {{1.0 / 3, 1.0 / 2, 2.0 / 5}, {1.0 / 2, 1, 2.0 / 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}},
      {{1.0 / 3, 1.0 / 2, 2.0 / 5}, {1.0 / 2, 1, 2.0 / 3}, {1.0 / 5, 1.0 / 3, 1.0 / 4}},
      {{1.0 / 3, 1.0 / 2, 2.0 / 5}, {1.0 / 2, 1, 2.0 / 3}, {2.0 / 10, 2.0 / 3, 4.0 / 13}},
  };
  const auto report = hm::evaluate(preds, gold);
  const std::size_t ks[4] = {1, 3, 5, 10};
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double expect[3] = {0, 0, 0};
    for (const auto& doc : by_hand[i])
      for (std::size_t m = 0; m < 3; ++m) expect[m] += doc[m] / 3.0;
    const auto& got = report.at(ks[i]);
    worst = std::max({worst, std::abs(got.precision - expect[0]), std::abs(got.recall - expect[1]),
                      std::abs(got.f1 - expect[2])});
  }
  const double single = hm::score_at_k({"a", "b", "c"}, {"a", "d"}, 3).f1;
  const bool ok = worst <= 1e-15 && std::abs(single - 0.4) <= 1e-15;
  return {ok, fmt::format("[a,b,c] vs [a,d]: F1@3 = {:.17g}; 3-document fixture max deviation {:.2e}", single, worst)};
}

Outcome loss_arithmetic() {
  const hm::RelevanceConfig d1{0.5, 1, 1.0, 1.0};
  const hm::RelevanceConfig d4{0.5, 4, 1.0, 1.0};
  const double satisfied = *hm::triplet_loss(std::vector<double>{2.0}, std::vector<double>{0.5}, d1);
  const double equal = *hm::triplet_loss(std::vector<double>{0.7}, std::vector<double>{0.7}, d4);
  const double hinge = *hm::triplet_loss(std::vector<double>{0.1}, std::vector<double>{0.3}, d1);
  bool ok = satisfied == 0.0 && equal == 0.5 && std::abs(hinge - 1.2) <= 1e-15;
  std::string margins;
  for (std::size_t d : {1u, 4u, 768u}) {
    const hm::RelevanceConfig cfg{0.5, d, 1.0, 1.0};
    const double m = *hm::triplet_loss(std::vector<double>{0.0}, std::vector<double>{0.0}, cfg);
    ok = ok && m == 1.0 / std::sqrt(static_cast<double>(d));
    margins += fmt::format(" d_h={}:{:.6f}", d, m);
  }
  return {ok, fmt::format("losses {} / {} / {:.17g}; equal-score hinge{}", satisfied, equal, hinge, margins)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"geometry suite", geometry},     {"gradient check", gradient},   {"overfit", overfit},
      {"ablation direction", ablation}, {"eval fixture", eval_fixture}, {"loss arithmetic", loss_arithmetic},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("%s %s: %s\n", o.passed ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
