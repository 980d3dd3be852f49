#include "hypermatch/training.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "hypermatch/error.hpp"
#include "hypermatch/parallel.hpp"
#include "hypermatch/rng.hpp"

namespace hypermatch {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning_rate must be >= 0");
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (!(warmup_proportion >= 0.0 && warmup_proportion < 1.0)) {
    throw InvalidArgument("warmup_proportion must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(clip_norm >= 0.0)) throw InvalidArgument("clip_norm must be >= 0");
  if (epochs == 0) throw InvalidArgument("epochs must be >= 1");
  if (max_negatives == 0) throw InvalidArgument("max_negatives must be >= 1");
  if (threads == 0) throw InvalidArgument("threads must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},   {"warmup_proportion", warmup_proportion},
          {"weight_decay", weight_decay},   {"beta1", beta1},             {"beta2", beta2},
          {"epsilon", epsilon},             {"clip_norm", clip_norm},     {"epochs", epochs},
          {"seed", seed},                   {"max_negatives", max_negatives}, {"patience", patience}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto read = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("train config key '") + key + "': " + e.what());
    }
  };
  read("learning_rate", c.learning_rate);
  read("batch_size", c.batch_size);
  read("warmup_proportion", c.warmup_proportion);
  read("weight_decay", c.weight_decay);
  read("beta1", c.beta1);
  read("beta2", c.beta2);
  read("epsilon", c.epsilon);
  read("clip_norm", c.clip_norm);
  read("epochs", c.epochs);
  read("seed", c.seed);
  read("max_negatives", c.max_negatives);
  read("patience", c.patience);
  read("threads", c.threads);
  read("checkpoint_every", c.checkpoint_every);
  return c;
}

AdamState AdamState::zeros(const Parameters& params) {
  AdamState s;
  for (const auto& t : params.tensors()) {
    s.m.emplace_back(t.tensor->shape());
    s.v.emplace_back(t.tensor->shape());
  }
  return s;
}

double lr_multiplier(std::uint64_t step, std::uint64_t total, double warmup_proportion) {
  if (total == 0) return 0.0;
  const double s = static_cast<double>(step);
  const double n = static_cast<double>(total);
  const double w = warmup_proportion * n;
  double m = 0.0;
  if (s < w) {
    m = s / w;
  } else if (n > w) {
    m = (n - s) / (n - w);
  }
  return std::clamp(m, 0.0, 1.0);
}

void adamw_update(Parameters& params, AdamState& adam, const std::vector<Tensor>& grads, double lr,
                  const TrainConfig& config) {
  auto tensors = params.tensors();
  if (grads.size() != tensors.size() || adam.m.size() != tensors.size() || adam.v.size() != tensors.size()) {
    throw InvalidArgument("adamw_update: gradient/optimizer slot count does not match the parameters");
  }
  adam.step += 1;
  const double t = static_cast<double>(adam.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    std::span<double> p = tensors[k].tensor->values();
    std::span<const double> g = grads[k].values();
    std::span<double> m = adam.m[k].values();
    std::span<double> v = adam.v[k].values();
    if (g.size() != p.size()) throw InvalidArgument("adamw_update: gradient shape mismatch for " + tensors[k].name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * (g[i] * g[i]);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= lr * (mhat / (std::sqrt(vhat) + config.epsilon) + config.weight_decay * p[i]);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.values()) v *= s;
    }
  }
  return norm;
}

TripletSelection select_triplets(const PreparedDocument& doc, std::uint64_t seed, std::uint64_t step,
                                 std::size_t max_negatives) {
  TripletSelection sel;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < doc.candidates.size(); ++i) {
    if (doc.candidates[i].label == Label::positive) sel.positives.push_back(i);
    else if (doc.candidates[i].label == Label::negative) negatives.push_back(i);
  }
  if (negatives.size() > max_negatives) {
    Rng rng(hash_combine(hash_combine(seed, step), fnv1a64(doc.id)));
    // Partial Fisher-Yates: the first max_negatives slots become the sample.
    for (std::size_t i = 0; i < max_negatives; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(negatives.size() - i));
      std::swap(negatives[i], negatives[j]);
    }
    negatives.resize(max_negatives);
    std::sort(negatives.begin(), negatives.end());
  }
  sel.negatives = std::move(negatives);
  return sel;
}

std::optional<DocumentGradient> document_gradient(const Parameters& params, const ModelConfig& model,
                                                  const PreparedDocument& doc, const TripletSelection& sel) {
  if (sel.positives.empty() || sel.negatives.empty()) return std::nullopt;
  try {
    autodiff::Graph g;
    const auto bound = autodiff::bind(g, params, model);
    const auto loss = autodiff::document_loss(g, bound, model, doc.embeddings, doc.candidates, sel.positives,
                                              sel.negatives);
    DocumentGradient out;
    out.loss = loss.value()[0];
    for (auto& lg : g.backward(loss)) out.grads.push_back(std::move(lg.grad));
    return out;
  } catch (const NumericFailure& e) {
    throw NumericFailure("document " + doc.id + ": " + e.what());
  }
}

StepResult train_step(Parameters& params, AdamState& adam, const ModelConfig& model, const TrainConfig& config,
                      const std::vector<const PreparedDocument*>& batch, std::uint64_t total_steps) {
  const std::uint64_t step = adam.step + 1;
  std::vector<std::optional<DocumentGradient>> results(batch.size());
  parallel_for(batch.size(), config.threads, [&](std::size_t i) {
    const auto sel = select_triplets(*batch[i], config.seed, step, config.max_negatives);
    results[i] = document_gradient(params, model, *batch[i], sel);
  });

  StepResult r;
  std::vector<Tensor> grads;
  for (const auto& t : params.tensors()) grads.emplace_back(t.tensor->shape());
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i]) {
      ++r.skipped;
      continue;
    }
    ++r.used;
    loss_sum += results[i]->loss;
    for (std::size_t k = 0; k < grads.size(); ++k) {
      std::span<double> acc = grads[k].values();
      std::span<const double> g = results[i]->grads[k].values();
      for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += g[e];
    }
  }
  if (r.used > 0) {
    const double n = static_cast<double>(r.used);
    r.loss = loss_sum / n;
    for (auto& g : grads) {
      for (double& v : g.values()) v /= n;
    }
  }
  if (!std::isfinite(r.loss)) throw NumericFailure("non-finite batch loss at step " + std::to_string(step));
  r.grad_norm = clip_global_norm(grads, config.clip_norm);
  r.lr = config.learning_rate * lr_multiplier(step, total_steps, config.warmup_proportion);
  adamw_update(params, adam, grads, r.lr, config);
  if (!params.all_finite()) throw NumericFailure("parameters became non-finite at step " + std::to_string(step));
  return r;
}

nlohmann::json EpochRecord::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"step", step}, {"mean_loss", mean_loss}, {"documents", documents}};
  if (validation_f1_at_3) j["validation_f1_at_3"] = *validation_f1_at_3;
  return j;
}

EvalReport evaluate_model(const Parameters& params, const ModelConfig& model,
                          const std::vector<PreparedDocument>& docs, const std::vector<std::size_t>& ks,
                          std::size_t threads) {
  std::vector<std::vector<TokenSeq>> predictions(docs.size()), gold(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const auto ranked = rank_document(params, model, docs[i]);
    for (const auto& c : ranked.ranked) predictions[i].push_back(c.surface);
    gold[i] = docs[i].gold;
  });
  return evaluate(predictions, gold, ks);
}

double pairwise_accuracy(const Parameters& params, const ModelConfig& model,
                         const std::vector<PreparedDocument>& docs, std::size_t threads) {
  std::vector<int> verdict(docs.size(), -1);
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const auto& d = docs[i];
    const bool pos = std::any_of(d.candidates.begin(), d.candidates.end(),
                                 [](const Candidate& c) { return c.label == Label::positive; });
    const bool neg = std::any_of(d.candidates.begin(), d.candidates.end(),
                                 [](const Candidate& c) { return c.label == Label::negative; });
    if (!pos || !neg) return;
    verdict[i] = pairwise_ranking_correct(score_candidates(params, model, d.embeddings, d.candidates), d.candidates);
  });
  std::size_t total = 0, correct = 0;
  for (int v : verdict) {
    if (v < 0) continue;
    ++total;
    correct += static_cast<std::size_t>(v);
  }
  return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

CheckpointFile make_checkpoint(const ModelConfig& model, const Parameters& params, const AdamState& adam) {
  CheckpointFile f;
  f.config_hash = hash_config(model);
  f.step = adam.step;
  const auto tensors = params.tensors();
  for (const auto& t : tensors) f.records.emplace_back("param/" + t.name, *t.tensor);
  for (std::size_t k = 0; k < tensors.size() && k < adam.m.size(); ++k) {
    f.records.emplace_back("adam_m/" + tensors[k].name, adam.m[k]);
    f.records.emplace_back("adam_v/" + tensors[k].name, adam.v[k]);
  }
  return f;
}

namespace {

struct LoopState {
  double best_f1 = -1.0;
  std::size_t stale = 0;
  double epoch_loss_sum = 0.0;
  std::size_t epoch_docs = 0;
  std::optional<Parameters> best;
};

CheckpointFile snapshot(const ModelConfig& model, const Parameters& params, const AdamState& adam,
                        const LoopState& loop) {
  CheckpointFile f = make_checkpoint(model, params, adam);
  f.records.emplace_back("state/train", Tensor::vector({loop.best_f1, static_cast<double>(loop.stale),
                                                        loop.epoch_loss_sum, static_cast<double>(loop.epoch_docs)}));
  if (loop.best) {
    for (const auto& t : loop.best->tensors()) f.records.emplace_back("best/" + t.name, *t.tensor);
  }
  return f;
}

void restore(const CheckpointFile& file, const ModelConfig& model, Parameters& params, AdamState& adam,
             LoopState& loop) {
  params = load_parameters(file, model);
  adam = AdamState::zeros(params);
  adam.step = file.step;
  const auto tensors = params.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const Tensor* m = file.find("adam_m/" + tensors[k].name);
    const Tensor* v = file.find("adam_v/" + tensors[k].name);
    if (m == nullptr || v == nullptr || m->shape() != adam.m[k].shape() || v->shape() != adam.v[k].shape()) {
      throw CorruptData("checkpoint lacks optimizer state for " + tensors[k].name);
    }
    adam.m[k] = *m;
    adam.v[k] = *v;
  }
  if (const Tensor* s = file.find("state/train"); s != nullptr && s->size() == 4) {
    loop.best_f1 = (*s)[0];
    loop.stale = static_cast<std::size_t>((*s)[1]);
    loop.epoch_loss_sum = (*s)[2];
    loop.epoch_docs = static_cast<std::size_t>((*s)[3]);
  }
  if (file.find("best/" + tensors.front().name) != nullptr) {
    Parameters best(model);
    for (auto& t : best.tensors()) {
      const Tensor* b = file.find("best/" + t.name);
      if (b == nullptr || b->shape() != t.tensor->shape()) throw CorruptData("checkpoint best/" + t.name + " missing");
      *t.tensor = *b;
    }
    loop.best = std::move(best);
  }
}

bool trainable(const PreparedDocument& d) {
  bool pos = false, neg = false;
  for (const auto& c : d.candidates) {
    pos = pos || c.label == Label::positive;
    neg = neg || c.label == Label::negative;
  }
  return pos && neg;
}

}  // namespace

TrainResult train(const ModelConfig& model, const TrainConfig& config, const std::vector<PreparedDocument>& train_docs,
                  const std::vector<PreparedDocument>& validation, const Parameters& initial,
                  const CheckpointFile* resume, const EpochCallback& on_epoch) {
  model.validate();
  config.validate();
  if (train_docs.empty()) throw InvalidArgument("train: empty dataset");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_docs.size(); ++i) {
    if (trainable(train_docs[i])) usable.push_back(i);
  }
  if (usable.empty()) throw InvalidArgument("train: no document has both a positive and a negative candidate");
  if (usable.size() < train_docs.size()) {
    spdlog::info("train: skipping {} document(s) without both positive and negative candidates",
                 train_docs.size() - usable.size());
  }

  const std::uint64_t per_epoch = (usable.size() + config.batch_size - 1) / config.batch_size;
  const std::uint64_t total = per_epoch * config.epochs;

  TrainResult result;
  result.params = initial;
  result.adam = AdamState::zeros(result.params);
  LoopState loop;
  if (resume != nullptr) restore(*resume, model, result.params, result.adam, loop);

  const bool early_stopping = !validation.empty();
  const bool checkpointing = !config.checkpoint_path.empty();
  auto save = [&] {
    if (checkpointing) write_checkpoint(config.checkpoint_path, snapshot(model, result.params, result.adam, loop));
  };

  const std::uint64_t start = result.adam.step;
  for (std::size_t epoch = static_cast<std::size_t>(start / per_epoch); epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    Rng(hash_combine(config.seed, epoch)).shuffle(order);
    const std::uint64_t first = epoch == start / per_epoch ? start % per_epoch : 0;
    for (std::uint64_t b = first; b < per_epoch; ++b) {
      if (config.stop_after_step && result.adam.step >= *config.stop_after_step) {
        result.interrupted = true;
        result.step = result.adam.step;
        save();
        return result;
      }
      std::vector<const PreparedDocument*> batch;
      const std::size_t lo = static_cast<std::size_t>(b * config.batch_size);
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&train_docs[order[i]]);
      const StepResult r = train_step(result.params, result.adam, model, config, batch, total);
      loop.epoch_loss_sum += r.loss * static_cast<double>(r.used);
      loop.epoch_docs += r.used;
      spdlog::debug("step {} loss {:.6f} lr {:.3e} grad_norm {:.4f}", result.adam.step, r.loss, r.lr, r.grad_norm);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.step = result.adam.step;
    rec.documents = loop.epoch_docs;
    rec.mean_loss = loop.epoch_docs == 0 ? 0.0 : loop.epoch_loss_sum / static_cast<double>(loop.epoch_docs);
    loop.epoch_loss_sum = 0.0;
    loop.epoch_docs = 0;
    if (early_stopping) {
      const double f1 = evaluate_model(result.params, model, validation, {3}, config.threads).at(3).f1;
      rec.validation_f1_at_3 = f1;
      if (f1 > loop.best_f1) {
        loop.best_f1 = f1;
        loop.best = result.params;
        loop.stale = 0;
      } else {
        ++loop.stale;
      }
    }
    spdlog::info("epoch {} step {} loss {:.6f}{}", rec.epoch, rec.step, rec.mean_loss,
                 rec.validation_f1_at_3 ? fmt::format(" val F1@3 {:.4f}", *rec.validation_f1_at_3) : "");
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) save();
    if (early_stopping && loop.stale >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (early_stopping && loop.best) result.params = *loop.best;
  result.step = result.adam.step;
  save();
  return result;
}

}  // namespace hypermatch
