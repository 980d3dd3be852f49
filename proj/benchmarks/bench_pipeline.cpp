// google-benchmark view of end-to-end candidate scoring.

#include <benchmark/benchmark.h>

#include "hypermatch/model.hpp"
#include "hypermatch/parallel.hpp"
#include "hypermatch/rng.hpp"
#include "hypermatch/synth.hpp"

namespace {

using namespace hypermatch;

PreparedDocument make_document(std::size_t tokens, const ModelConfig& model, std::size_t index) {
  CorpusRecord r;
  r.id = "bench-" + std::to_string(index);
  r.tokens = pseudo_words(tokens, hash_combine(17, index));
  r.gold = {{r.tokens[0]}};
  return prepare_document(r, synth_embeddings(r, model.layers, model.hidden, 3), model.max_phrase_length);
}

ModelConfig model_for(std::size_t d_h) {
  ModelConfig m;
  m.hyperbolic = d_h;
  return m;
}

void BM_ScoreDocument(benchmark::State& state) {
  const auto tokens = static_cast<std::size_t>(state.range(0));
  const ModelConfig model = model_for(static_cast<std::size_t>(state.range(1)));
  const Parameters params = init_parameters(model, 1);
  const PreparedDocument doc = make_document(tokens, model, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rank_document(params, model, doc));
  state.counters["candidates"] = static_cast<double>(doc.candidates.size());
}
BENCHMARK(BM_ScoreDocument)->Args({128, 64})->Args({512, 64})->Unit(benchmark::kMillisecond);

void BM_ScoreDocumentsThreads(benchmark::State& state) {
  const auto threads = static_cast<std::size_t>(state.range(0));
  const ModelConfig model = model_for(64);
  const Parameters params = init_parameters(model, 1);
  std::vector<PreparedDocument> docs;
  for (std::size_t i = 0; i < 8; ++i) docs.push_back(make_document(128, model, i));
  std::vector<ScoredDocument> out(docs.size());
  for (auto _ : state) {
    parallel_for(docs.size(), threads, [&](std::size_t i) { out[i] = rank_document(params, model, docs[i]); });
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * docs.size()));
}
BENCHMARK(BM_ScoreDocumentsThreads)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
