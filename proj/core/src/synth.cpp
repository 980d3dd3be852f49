#include "hypermatch/synth.hpp"

#include <cmath>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "hypermatch/error.hpp"
#include "hypermatch/porter.hpp"
#include "hypermatch/rng.hpp"

namespace hypermatch {

double synth_value(std::string_view token, std::size_t layer, std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  const std::uint64_t key = hash_combine(hash_combine(hash_combine(fnv1a64(token), layer), dim), seed);
  const std::uint64_t a = splitmix64(key);
  const std::uint64_t b = splitmix64(key ^ 0x5bd1e9955bd1e995ULL);
  return gaussian_from_bits(a, b) / std::sqrt(static_cast<double>(hidden));
}

LayeredTokenEmbeddings synth_embeddings(const CorpusRecord& record, std::size_t layers, std::size_t hidden,
                                        std::uint64_t seed) {
  if (layers == 0 || hidden == 0) throw InvalidArgument("synth_embeddings: L and d_r must be >= 1");
  std::size_t m = record.tokens.size();
  if (m > kMaxSequenceLength) {
    spdlog::warn("document '{}' has {} tokens; truncating to {}", record.id, m, kMaxSequenceLength);
    m = kMaxSequenceLength;
  }
  Tensor t({m, layers, hidden});
  std::size_t i = 0;
  for (std::size_t tok = 0; tok < m; ++tok) {
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t k = 0; k < hidden; ++k) t[i++] = synth_value(record.tokens[tok], l, k, hidden, seed);
    }
  }
  return LayeredTokenEmbeddings(std::move(t));
}

std::vector<std::string> pseudo_words(std::size_t count, std::uint64_t seed) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view finals = "aou";
  static constexpr std::string_view vowels = "aeiou";
  Rng rng(seed);
  std::vector<std::string> out;
  std::unordered_set<std::string> stems;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 100 * count + 1000) throw InvalidArgument("pseudo_words: could not generate enough words");
    std::string w;
    const std::size_t syllables = 2 + rng.below(2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(consonants[rng.below(consonants.size())]);
      const std::string_view v = s + 1 == syllables ? finals : vowels;
      w.push_back(v[rng.below(v.size())]);
    }
    if (porter_stem(w) != w) continue;
    if (!stems.insert(w).second) continue;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<CorpusRecord> synth_corpus(const SynthCorpusConfig& config) {
  if (config.min_gold == 0 || config.min_gold > config.max_gold) throw InvalidArgument("synth_corpus: bad gold range");
  if (config.min_filler > config.max_filler) throw InvalidArgument("synth_corpus: bad filler range");
  if (config.inventory < config.max_gold) throw InvalidArgument("synth_corpus: inventory smaller than max_gold");
  if (config.max_phrase_tokens == 0 || config.filler_vocabulary == 0) {
    throw InvalidArgument("synth_corpus: empty phrase or filler vocabulary");
  }
  Rng rng(config.seed);
  std::vector<std::size_t> lengths(config.inventory);
  std::size_t keyword_count = 0;
  for (auto& n : lengths) {
    n = 1 + static_cast<std::size_t>(rng.below(config.max_phrase_tokens));
    keyword_count += n;
  }
  const auto words = pseudo_words(keyword_count + config.filler_vocabulary, hash_combine(config.seed, 1));
  std::vector<TokenSeq> inventory;
  std::size_t next = 0;
  for (std::size_t n : lengths) {
    inventory.emplace_back(words.begin() + static_cast<std::ptrdiff_t>(next),
                           words.begin() + static_cast<std::ptrdiff_t>(next + n));
    next += n;
  }
  const std::vector<std::string> filler(words.begin() + static_cast<std::ptrdiff_t>(next), words.end());

  std::vector<CorpusRecord> out;
  out.reserve(config.documents);
  for (std::size_t d = 0; d < config.documents; ++d) {
    CorpusRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%04zu", d);
    r.id = id;
    const std::size_t g = config.min_gold + rng.below(config.max_gold - config.min_gold + 1);
    std::vector<std::size_t> pick(inventory.size());
    for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
    for (std::size_t i = 0; i < g; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pick.size() - i));
      std::swap(pick[i], pick[j]);
    }
    const std::size_t f = config.min_filler + rng.below(config.max_filler - config.min_filler + 1);
    TokenSeq base;
    for (std::size_t i = 0; i < f; ++i) base.push_back(filler[rng.below(filler.size())]);
    // Choose g distinct insertion slots among the f + 1 gaps, then splice.
    std::vector<std::size_t> slots(f + 1);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    for (std::size_t i = 0; i < g && i < slots.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(slots.size() - i));
      std::swap(slots[i], slots[j]);
    }
    std::vector<std::size_t> at(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(std::min(g, slots.size())));
    std::vector<std::size_t> phrase_for(f + 1, SIZE_MAX);
    for (std::size_t i = 0; i < at.size(); ++i) phrase_for[at[i]] = pick[i];
    for (std::size_t gap = 0; gap <= f; ++gap) {
      if (phrase_for[gap] != SIZE_MAX) {
        const auto& p = inventory[phrase_for[gap]];
        r.tokens.insert(r.tokens.end(), p.begin(), p.end());
      }
      if (gap < f) r.tokens.push_back(base[gap]);
    }
    for (std::size_t i = 0; i < at.size(); ++i) r.gold.push_back(inventory[pick[i]]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hypermatch
