#include "hypermatch_cli/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "hypermatch/error.hpp"

namespace hypermatch::cli {

namespace {

const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> s;
    const nlohmann::json j = ModelConfig{}.to_json();
    for (const auto& [k, v] : j.items()) s.insert(k);
    return s;
  }();
  return keys;
}

const std::set<std::string>& train_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> s;
    const nlohmann::json j = TrainConfig{}.to_json();
    for (const auto& [k, v] : j.items()) s.insert(k);
    s.insert("checkpoint_every");
    return s;
  }();
  return keys;
}

const std::set<std::string> kSynthKeys = {"documents", "min_gold", "max_gold", "min_filler", "max_filler",
                                          "inventory", "max_phrase_tokens", "filler_vocabulary"};
const std::set<std::string> kPathKeys = {"corpus", "validation", "embeddings", "checkpoint", "out", "predictions"};
const std::set<std::string> kOtherKeys = {"synthetic", "embedding_seed", "k", "threads"};

nlohmann::json train_json(const TrainConfig& t) {
  nlohmann::json j = t.to_json();
  j["threads"] = t.threads;
  j["checkpoint_every"] = t.checkpoint_every;
  return j;
}

template <class T>
T get_as(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

std::vector<std::string> known_keys() {
  std::set<std::string> all(model_keys());
  all.insert(train_keys().begin(), train_keys().end());
  all.insert(kSynthKeys.begin(), kSynthKeys.end());
  all.insert(kPathKeys.begin(), kPathKeys.end());
  all.insert(kOtherKeys.begin(), kOtherKeys.end());
  return {all.begin(), all.end()};
}

void RunConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object with flat keys");
  nlohmann::json m = model.to_json();
  nlohmann::json t = train_json(train);
  for (const auto& [key, value] : j.items()) {
    if (model_keys().contains(key)) {
      m[key] = value;
    } else if (train_keys().contains(key)) {
      t[key] = value;
    } else if (kSynthKeys.contains(key)) {
      const auto n = get_as<std::size_t>(value, key);
      if (key == "documents") synth.documents = n;
      else if (key == "min_gold") synth.min_gold = n;
      else if (key == "max_gold") synth.max_gold = n;
      else if (key == "min_filler") synth.min_filler = n;
      else if (key == "max_filler") synth.max_filler = n;
      else if (key == "inventory") synth.inventory = n;
      else if (key == "max_phrase_tokens") synth.max_phrase_tokens = n;
      else synth.filler_vocabulary = n;
    } else if (kPathKeys.contains(key)) {
      const std::filesystem::path p = get_as<std::string>(value, key);
      if (key == "corpus") corpus = p;
      else if (key == "validation") validation = p;
      else if (key == "embeddings") embeddings = p;
      else if (key == "checkpoint") checkpoint = p;
      else if (key == "out") out = p;
      else predictions = p;
    } else if (key == "synthetic") {
      synthetic = get_as<bool>(value, key);
    } else if (key == "embedding_seed") {
      embedding_seed = get_as<std::uint64_t>(value, key);
    } else if (key == "k") {
      ks = get_as<std::vector<std::size_t>>(value, key);
    } else if (key == "threads") {
      threads = get_as<std::size_t>(value, key);
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  try {
    model = ModelConfig::from_json(m);
    const auto path = train.checkpoint_path;
    const auto stop = train.stop_after_step;
    train = TrainConfig::from_json(t);
    train.checkpoint_path = path;
    train.stop_after_step = stop;
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (threads > 0) train.threads = threads;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  c.apply_json(j);
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = model.to_json();
  j.update(train_json(train));
  j["documents"] = synth.documents;
  j["min_gold"] = synth.min_gold;
  j["max_gold"] = synth.max_gold;
  j["min_filler"] = synth.min_filler;
  j["max_filler"] = synth.max_filler;
  j["inventory"] = synth.inventory;
  j["max_phrase_tokens"] = synth.max_phrase_tokens;
  j["filler_vocabulary"] = synth.filler_vocabulary;
  j["corpus"] = corpus.string();
  j["validation"] = validation.string();
  j["embeddings"] = embeddings.string();
  j["checkpoint"] = checkpoint.string();
  j["out"] = out.string();
  j["predictions"] = predictions.string();
  j["synthetic"] = synthetic;
  j["embedding_seed"] = embedding_seed;
  j["k"] = ks;
  j["threads"] = threads;
  return j;
}

}  // namespace hypermatch::cli
