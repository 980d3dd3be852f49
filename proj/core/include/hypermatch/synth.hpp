#pragma once

// Deterministic synthetic inputs: context-free token embeddings keyed by the
// token string, and a toy corpus with planted gold keyphrases.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hypermatch/data_io.hpp"
#include "hypermatch/encoders.hpp"

namespace hypermatch {

/// Entry (l, k) of the embedding of `token`: a standard Gaussian draw keyed
/// by (token, l, k, seed), scaled to variance 1/d_r.
double synth_value(std::string_view token, std::size_t layer, std::size_t dim, std::size_t hidden, std::uint64_t seed);

/// [M, L, d_r] embeddings of the record's tokens (first 512 only). Identical
/// token strings always get identical blocks, wherever they occur.
LayeredTokenEmbeddings synth_embeddings(const CorpusRecord& record, std::size_t layers, std::size_t hidden,
                                        std::uint64_t seed);

struct SynthCorpusConfig {
  std::size_t documents = 50;
  std::size_t min_gold = 1;
  std::size_t max_gold = 3;
  std::size_t min_filler = 20;
  std::size_t max_filler = 30;
  std::size_t inventory = 40;       // distinct keyphrases to draw gold from
  std::size_t max_phrase_tokens = 3;
  std::size_t filler_vocabulary = 300;
  std::uint64_t seed = 7;
};

/// Alphabetic pseudo-words whose Porter stems are pairwise distinct and equal
/// to the words themselves.
std::vector<std::string> pseudo_words(std::size_t count, std::uint64_t seed);

/// Documents of filler words with 1..3 gold phrases planted between them.
/// Keyphrase words never occur as filler or in a second keyphrase.
std::vector<CorpusRecord> synth_corpus(const SynthCorpusConfig& config);

}  // namespace hypermatch
