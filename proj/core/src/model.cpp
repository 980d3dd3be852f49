#include "hypermatch/model.hpp"

#include <algorithm>
#include <cmath>

#include "hypermatch/error.hpp"
#include "hypermatch/hyperbolic_graph.hpp"
#include "hypermatch/rng.hpp"

namespace hypermatch {

RelevanceConfig ModelConfig::relevance() const {
  RelevanceConfig r;
  r.lambda = lambda;
  r.d_h = hyperbolic;
  r.margin = margin;
  r.curvature = effective_curvature();
  return r;
}

void ModelConfig::validate() const {
  if (layers == 0 || hidden == 0 || hyperbolic == 0) throw InvalidArgument("model dimensions must be positive");
  if (max_phrase_length == 0) throw InvalidArgument("max_phrase_length must be >= 1");
  relevance().validate();
  Curvature check(curvature);
  (void)check;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"cnn_bias", cnn_bias},
          {"curvature", curvature},
          {"euclidean", euclidean},
          {"hidden", hidden},
          {"hyperbolic", hyperbolic},
          {"lambda", lambda},
          {"layers", layers},
          {"margin", margin},
          {"max_phrase_length", max_phrase_length},
          {"scorer_bias", scorer_bias},
          {"use_mixing", use_mixing}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("model config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "cnn_bias") c.cnn_bias = value.get<bool>();
      else if (key == "curvature") c.curvature = value.get<double>();
      else if (key == "euclidean") c.euclidean = value.get<bool>();
      else if (key == "hidden") c.hidden = value.get<std::size_t>();
      else if (key == "hyperbolic") c.hyperbolic = value.get<std::size_t>();
      else if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "layers") c.layers = value.get<std::size_t>();
      else if (key == "margin") c.margin = value.get<double>();
      else if (key == "max_phrase_length") c.max_phrase_length = value.get<std::size_t>();
      else if (key == "scorer_bias") c.scorer_bias = value.get<bool>();
      else if (key == "use_mixing") c.use_mixing = value.get<bool>();
      else throw InvalidArgument("unknown model config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("model config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

Parameters::Parameters(const ModelConfig& config) : use_mixing_(config.use_mixing) {
  const std::size_t d_r = config.hidden, d_h = config.hyperbolic;
  if (config.use_mixing) {
    mixing.v_a = Tensor({d_r});
    mixing.w_a = Tensor({d_r, d_r});
  }
  for (std::size_t n = 1; n <= config.max_phrase_length; ++n) {
    bank.filters.emplace_back(Shape{n, d_r, d_h});
    if (config.cnn_bias) bank.biases.emplace_back(Shape{d_h});
  }
  document.w_h = Tensor({d_r, d_h});
  scorer.weight = Tensor({d_h, 1});
  scorer.use_bias = config.scorer_bias;
  if (config.scorer_bias) scorer.bias = Tensor({1});
}

std::vector<NamedTensor> Parameters::tensors() {
  std::vector<NamedTensor> out;
  if (use_mixing_) {
    out.push_back({"mixing.v_a", &mixing.v_a});
    out.push_back({"mixing.w_a", &mixing.w_a});
  }
  for (std::size_t i = 0; i < bank.filters.size(); ++i) {
    out.push_back({"phrase.filter" + std::to_string(i + 1), &bank.filters[i]});
  }
  for (std::size_t i = 0; i < bank.biases.size(); ++i) {
    out.push_back({"phrase.bias" + std::to_string(i + 1), &bank.biases[i]});
  }
  out.push_back({"document.w_h", &document.w_h});
  out.push_back({"scorer.weight", &scorer.weight});
  if (scorer.use_bias) out.push_back({"scorer.bias", &scorer.bias});
  return out;
}

std::vector<ConstNamedTensor> Parameters::tensors() const {
  std::vector<ConstNamedTensor> out;
  for (const auto& t : const_cast<Parameters*>(this)->tensors()) out.push_back({t.name, t.tensor});
  return out;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.tensor->size();
  return n;
}

bool Parameters::all_finite() const {
  for (const auto& t : tensors()) {
    if (!t.tensor->all_finite()) return false;
  }
  return true;
}

Parameters init_parameters(const ModelConfig& config, std::uint64_t seed, double stddev) {
  config.validate();
  Parameters p(config);
  Rng rng(seed);
  for (auto& t : p.tensors()) {
    for (double& v : t.tensor->values()) v = rng.gaussian(0.0, stddev);
  }
  return p;
}

MixedTokenEmbeddings mix_tokens(const LayeredTokenEmbeddings& layers, const Parameters& params,
                                const ModelConfig& config) {
  if (layers.layers() != config.layers || layers.hidden() != config.hidden) {
    throw InvalidArgument("embeddings are [" + std::to_string(layers.layers()) + " x " +
                          std::to_string(layers.hidden()) + "] per token but the model expects [" +
                          std::to_string(config.layers) + " x " + std::to_string(config.hidden) + "]");
  }
  return config.use_mixing ? adaptive_mix(layers, params.mixing) : last_layer(layers);
}

std::vector<double> score_candidates(const Parameters& params, const ModelConfig& config,
                                     const LayeredTokenEmbeddings& layers, const std::vector<Candidate>& candidates) {
  std::vector<double> scores;
  if (candidates.empty()) return scores;
  const Curvature c(config.effective_curvature());
  const RelevanceConfig rcfg = config.relevance();
  const MixedTokenEmbeddings mixed = mix_tokens(layers, params, config);
  const PoincarePoint doc = encode_document(mixed, params.document, c);
  scores.reserve(candidates.size());
  for (const auto& cand : candidates) {
    const PoincarePoint phrase = encode_phrase(mixed, params.bank, c, cand.start, cand.length);
    const double s = relevance(phrase, doc, params.scorer, rcfg);
    if (!std::isfinite(s)) throw NumericFailure("non-finite relevance score");
    scores.push_back(s);
  }
  return scores;
}

ScoredDocument rank_document(const Parameters& params, const ModelConfig& config, const PreparedDocument& doc) {
  const auto scores = score_candidates(params, config, doc.embeddings, doc.candidates);
  std::vector<ScoredCandidate> scored;
  scored.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& c = doc.candidates[i];
    scored.push_back({c.start, c.length, c.surface, c.stemmed, scores[i]});
  }
  return rank_candidates(doc.id, std::move(scored));
}

PreparedDocument prepare_document(const Document& doc, LayeredTokenEmbeddings embeddings,
                                  std::size_t max_phrase_length) {
  if (embeddings.tokens() > doc.tokens.size()) {
    throw InvalidArgument("document " + doc.id + " has " + std::to_string(doc.tokens.size()) + " tokens but " +
                          std::to_string(embeddings.tokens()) + " embedding rows");
  }
  Document covered{doc.id, {}, doc.gold};
  covered.tokens.assign(doc.tokens.begin(), doc.tokens.begin() + static_cast<std::ptrdiff_t>(embeddings.tokens()));
  PreparedDocument out;
  out.id = doc.id;
  out.candidates = label_candidates(extract_candidates(covered, max_phrase_length), doc.gold);
  out.embeddings = std::move(embeddings);
  out.gold = doc.gold;
  return out;
}

namespace {

std::vector<Candidate> select(const std::vector<Candidate>& candidates, const std::vector<std::size_t>& a,
                              const std::vector<std::size_t>& b) {
  std::vector<Candidate> out;
  out.reserve(a.size() + b.size());
  for (std::size_t i : a) out.push_back(candidates.at(i));
  for (std::size_t i : b) out.push_back(candidates.at(i));
  return out;
}

}  // namespace

std::optional<double> document_loss(const Parameters& params, const ModelConfig& config,
                                    const LayeredTokenEmbeddings& layers, const std::vector<Candidate>& candidates,
                                    const std::vector<std::size_t>& positives,
                                    const std::vector<std::size_t>& negatives) {
  if (positives.empty() || negatives.empty()) return std::nullopt;
  const auto scores = score_candidates(params, config, layers, select(candidates, positives, negatives));
  const std::span<const double> all(scores);
  return triplet_loss(all.first(positives.size()), all.subspan(positives.size()), config.relevance());
}

bool pairwise_ranking_correct(const std::vector<double>& scores, const std::vector<Candidate>& candidates) {
  double min_pos = INFINITY, max_neg = -INFINITY;
  bool any_pos = false, any_neg = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].label == Label::positive) {
      min_pos = std::min(min_pos, scores[i]);
      any_pos = true;
    } else if (candidates[i].label == Label::negative) {
      max_neg = std::max(max_neg, scores[i]);
      any_neg = true;
    }
  }
  if (!any_pos || !any_neg) return true;
  return min_pos > max_neg;
}

namespace autodiff {

BoundParameters bind(Graph& g, const Parameters& params, const ModelConfig& config) {
  BoundParameters b;
  std::size_t slot = 0;
  if (config.use_mixing) {
    b.v_a = g.parameter(params.mixing.v_a, slot++);
    b.w_a = g.parameter(params.mixing.w_a, slot++);
  }
  for (const auto& f : params.bank.filters) b.filters.push_back(g.parameter(f, slot++));
  for (const auto& bias : params.bank.biases) b.biases.push_back(g.parameter(bias, slot++));
  b.w_h = g.parameter(params.document.w_h, slot++);
  b.scorer_weight = g.parameter(params.scorer.weight, slot++);
  if (params.scorer.use_bias) b.scorer_bias = g.parameter(params.scorer.bias, slot++);
  return b;
}

Var score_candidates(Graph& g, const BoundParameters& bound, const ModelConfig& config,
                     const LayeredTokenEmbeddings& layers, const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw InvalidArgument("score_candidates: no candidates");
  if (layers.layers() != config.layers || layers.hidden() != config.hidden) {
    throw InvalidArgument("score_candidates: embedding shape does not match the model");
  }
  const double c = config.effective_curvature();
  const Var h = g.constant_ref(layers.tensor());
  const Var mixed = config.use_mixing ? adaptive_mix(h, bound.v_a, bound.w_a) : last_layer(h);
  const Var doc = encode_document(mixed, bound.w_h, c);

  std::vector<Var> groups;
  std::vector<std::size_t> position(candidates.size());
  std::size_t row = 0;
  for (std::size_t n = 1; n <= config.max_phrase_length; ++n) {
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].length != n) continue;
      if (candidates[i].start + n > layers.tokens()) throw InvalidArgument("score_candidates: span out of bounds");
      starts.push_back(candidates[i].start);
      position[i] = row++;
    }
    if (starts.empty()) continue;
    const Var bias = bound.biases.empty() ? Var{} : bound.biases[n - 1];
    groups.push_back(encode_phrases(mixed, bound.filters[n - 1], bias, starts, c));
  }
  if (row != candidates.size()) throw InvalidArgument("score_candidates: candidate length outside 1..N");
  const Var phrases = gather_rows(concat_rows(groups), std::move(position));
  const Var f = f_c_rows(phrases, bound.scorer_weight, bound.scorer_bias, c);
  return relevance_rows(phrases, doc, f, config.relevance());
}

Var document_loss(Graph& g, const BoundParameters& bound, const ModelConfig& config,
                  const LayeredTokenEmbeddings& layers, const std::vector<Candidate>& candidates,
                  const std::vector<std::size_t>& positives, const std::vector<std::size_t>& negatives) {
  if (positives.empty() || negatives.empty()) return {};
  const Var scores = score_candidates(g, bound, config, layers, select(candidates, positives, negatives));
  std::vector<std::size_t> pos(positives.size()), neg(negatives.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = pos.size() + i;
  return triplet_loss(gather_rows(scores, std::move(pos)), gather_rows(scores, std::move(neg)), config.relevance());
}

}  // namespace autodiff

}  // namespace hypermatch
