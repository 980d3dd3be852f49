#include "hypermatch_cli/app.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hypermatch/checkpoint.hpp"
#include "hypermatch/data_io.hpp"
#include "hypermatch/error.hpp"
#include "hypermatch/eval.hpp"
#include "hypermatch/parallel.hpp"
#include "hypermatch/selfcheck.hpp"
#include "hypermatch/synth.hpp"
#include "hypermatch/training.hpp"
#include "hypermatch_bench/runner.hpp"
#include "hypermatch_cli/run_config.hpp"

namespace hypermatch::cli {

namespace {

// Raw flag values; unset optionals leave the config file's value alone.
struct Flags {
  std::string config;
  std::optional<std::string> corpus, validation, embeddings, checkpoint, out, predictions;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::vector<std::size_t> k;
  bool synthetic = false;
  bool euclidean = false;
  bool no_mixing = false;
  bool resume = false;
  std::optional<std::uint64_t> stop_after_step;
  std::string fault;
  std::string baseline;
  std::string machine;
  bool gate = false;
  bool quick = false;
};

RunConfig resolve(const Flags& f) {
  RunConfig rc = f.config.empty() ? RunConfig{} : RunConfig::from_file(f.config);
  if (f.corpus) rc.corpus = *f.corpus;
  if (f.validation) rc.validation = *f.validation;
  if (f.embeddings) rc.embeddings = *f.embeddings;
  if (f.checkpoint) rc.checkpoint = *f.checkpoint;
  if (f.out) rc.out = *f.out;
  if (f.predictions) rc.predictions = *f.predictions;
  if (f.seed) {
    rc.train.seed = *f.seed;
    rc.synth.seed = *f.seed;
  }
  if (f.threads) {
    if (*f.threads == 0) throw UsageError("--threads must be >= 1");
    rc.threads = *f.threads;
  }
  if (rc.threads == 0) rc.threads = default_threads();
  rc.train.threads = rc.threads;
  if (!f.k.empty()) rc.ks = f.k;
  if (f.synthetic) rc.synthetic = true;
  if (f.euclidean) rc.model.euclidean = true;
  if (f.no_mixing) rc.model.use_mixing = false;
  rc.train.stop_after_step = f.stop_after_step;
  try {
    rc.model.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return rc;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

void require_embedding_source(const RunConfig& rc) {
  require(!rc.embeddings.empty() || rc.synthetic, "either --embeddings or --synthetic is required");
  require(rc.embeddings.empty() || !rc.synthetic, "--embeddings and --synthetic are mutually exclusive");
}

// Per-document embeddings from an HMEB file or the synthetic generator.
class EmbeddingSource {
 public:
  explicit EmbeddingSource(const RunConfig& rc) : rc_(rc) {
    if (rc.synthetic) return;
    reader_ = std::make_unique<EmbeddingReader>(rc.embeddings);
    if (reader_->layers() != rc.model.layers || reader_->hidden() != rc.model.hidden) {
      throw InvalidArgument(fmt::format("{} holds L = {}, d_r = {} but the model expects L = {}, d_r = {}",
                                        rc.embeddings.string(), reader_->layers(), reader_->hidden(), rc.model.layers,
                                        rc.model.hidden));
    }
  }

  /// nullopt for a document with no tokens to score.
  std::optional<LayeredTokenEmbeddings> load(const CorpusRecord& record) const {
    if (rc_.synthetic) return synth_embeddings(record, rc_.model.layers, rc_.model.hidden, rc_.embedding_seed);
    if (reader_->token_count(record.id) == 0) return std::nullopt;
    return reader_->load(record.id);
  }

 private:
  const RunConfig& rc_;
  std::unique_ptr<EmbeddingReader> reader_;
};

std::vector<PreparedDocument> prepare_all(const std::vector<CorpusRecord>& records, const EmbeddingSource& source,
                                          const RunConfig& rc) {
  std::vector<std::optional<PreparedDocument>> slots(records.size());
  parallel_for(records.size(), rc.threads, [&](std::size_t i) {
    if (auto emb = source.load(records[i])) {
      slots[i] = prepare_document(records[i], std::move(*emb), rc.model.max_phrase_length);
    }
  });
  std::vector<PreparedDocument> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      spdlog::warn("document '{}' has no tokens; skipped", records[i].id);
    }
  }
  return out;
}

// Output stream for --out, or `fallback` when unset or "-".
class Output {
 public:
  Output(const std::filesystem::path& path, std::ostream& fallback) : stream_(&fallback) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::trunc);
    if (!file_) throw IoError("cannot open " + path.string() + " for writing");
    stream_ = &file_;
  }
  std::ostream& get() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw IoError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

int cmd_train(const Flags& flags, std::ostream& out) {
  const RunConfig rc = resolve(flags);
  require(!rc.corpus.empty(), "--corpus is required");
  require_embedding_source(rc);
  require(!rc.checkpoint.empty(), "--checkpoint is required");
  require(!flags.resume || std::filesystem::exists(rc.checkpoint), "--resume needs an existing --checkpoint");

  const auto records = load_corpus(rc.corpus);
  const EmbeddingSource source(rc);
  const auto docs = prepare_all(records, source, rc);
  std::vector<PreparedDocument> validation;
  if (!rc.validation.empty()) validation = prepare_all(load_corpus(rc.validation), source, rc);

  TrainConfig tc = rc.train;
  tc.checkpoint_path = rc.checkpoint;
  std::optional<CheckpointFile> resume;
  if (flags.resume) {
    resume = read_checkpoint(rc.checkpoint);
    if (resume->config_hash != hash_config(rc.model)) {
      throw StateError("checkpoint " + rc.checkpoint.string() + " was written for a different model config");
    }
  }
  Output log(rc.out, out);
  const bool log_to_file = !rc.out.empty() && rc.out != "-";
  const auto result = train(rc.model, tc, docs, validation, init_parameters(rc.model, tc.seed),
                            resume ? &*resume : nullptr, [&](const EpochRecord& rec) {
                              if (log_to_file) log.get() << rec.to_json().dump() << '\n' << std::flush;
                            });
  if (log_to_file) log.finish();
  spdlog::info("wrote {} after {} steps{}", rc.checkpoint.string(), result.step,
               result.interrupted ? " (interrupted)" : result.stopped_early ? " (early stop)" : "");
  return kExitOk;
}

int cmd_extract(const Flags& flags, std::ostream& out) {
  const RunConfig rc = resolve(flags);
  require(!rc.corpus.empty(), "--corpus is required");
  require_embedding_source(rc);
  require(!rc.checkpoint.empty(), "--checkpoint is required");
  require(flags.k.size() <= 1, "extract takes a single --k");
  const std::size_t k = flags.k.empty() ? 10 : flags.k.front();
  require(k >= 1, "--k must be >= 1");

  const Parameters params = load_parameters(read_checkpoint(rc.checkpoint), rc.model);
  const auto records = load_corpus(rc.corpus);
  const EmbeddingSource source(rc);
  const auto docs = prepare_all(records, source, rc);
  std::vector<std::string> lines(docs.size());
  parallel_for(docs.size(), rc.threads, [&](std::size_t i) {
    const ScoredDocument ranked = rank_document(params, rc.model, docs[i]);
    nlohmann::json phrases = nlohmann::json::array(), scores = nlohmann::json::array();
    for (std::size_t r = 0; r < ranked.ranked.size() && r < k; ++r) {
      phrases.push_back(ranked.ranked[r].surface);
      scores.push_back(ranked.ranked[r].score);
    }
    lines[i] = nlohmann::json{{"id", docs[i].id}, {"keyphrases", phrases}, {"scores", scores}}.dump();
  });
  Output dest(rc.out, out);
  for (const auto& line : lines) dest.get() << line << '\n';
  dest.finish();
  return kExitOk;
}

std::vector<std::pair<std::string, std::vector<TokenSeq>>> parse_predictions(std::istream& in,
                                                                             const std::string& source) {
  std::vector<std::pair<std::string, std::vector<TokenSeq>>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string at = source + ":" + std::to_string(number);
    try {
      const auto j = nlohmann::json::parse(line);
      out.emplace_back(j.at("id").get<std::string>(), j.at("keyphrases").get<std::vector<TokenSeq>>());
    } catch (const nlohmann::json::exception& e) {
      throw CorruptData(at + ": " + e.what());
    }
  }
  return out;
}

int cmd_eval(const Flags& flags, std::ostream& out) {
  const RunConfig rc = resolve(flags);
  require(!rc.corpus.empty(), "--corpus is required");
  require(!rc.ks.empty(), "--k needs at least one value");
  for (std::size_t k : rc.ks) require(k >= 1, "--k values must be >= 1");

  const auto records = load_corpus(rc.corpus);
  std::vector<std::pair<std::string, std::vector<TokenSeq>>> predicted;
  if (rc.predictions.empty() || rc.predictions == "-") {
    predicted = parse_predictions(std::cin, "<stdin>");
  } else {
    std::ifstream in(rc.predictions);
    if (!in) throw IoError("cannot open predictions " + rc.predictions.string());
    predicted = parse_predictions(in, rc.predictions.string());
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].id, i);
  std::vector<std::vector<TokenSeq>> preds(records.size()), gold(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) gold[i] = records[i].gold;
  for (auto& [id, phrases] : predicted) {
    const auto it = index.find(id);
    if (it == index.end()) throw NotFound("prediction for unknown document '" + id + "'");
    preds[it->second] = std::move(phrases);
  }
  const EvalReport report = evaluate(preds, gold, rc.ks);
  out << format_table(report);
  if (!rc.out.empty()) {
    Output dest(rc.out, out);
    dest.get() << to_json(report).dump(2) << '\n';
    dest.finish();
  }
  return kExitOk;
}

int cmd_selftest(const Flags& flags, std::ostream& out) {
  const std::uint64_t seed = flags.seed.value_or(1);
  const GeometryOps ops = flags.fault.empty() ? library_ops() : faulty_ops(flags.fault);
  auto results = run_geometry_suite(ops, seed);
  results.push_back(run_gradient_property(seed));
  std::vector<std::string> failed;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    if (!r.passed) failed.push_back(r.name);
  }
  if (failed.empty()) {
    out << "all " << results.size() << " properties passed\n";
    return kExitOk;
  }
  std::string names;
  for (const auto& n : failed) names += (names.empty() ? "" : ", ") + n;
  out << failed.size() << " of " << results.size() << " properties failed: " << names << '\n';
  return kExitFailure;
}

int cmd_synth(const Flags& flags, std::ostream&) {
  const RunConfig rc = resolve(flags);
  require(!rc.corpus.empty(), "--corpus (output path) is required");
  const auto records = synth_corpus(rc.synth);
  write_corpus(rc.corpus, records);
  if (!rc.embeddings.empty()) {
    std::vector<std::pair<std::string, Tensor>> docs;
    for (const auto& r : records) {
      docs.emplace_back(r.id, synth_embeddings(r, rc.model.layers, rc.model.hidden, rc.embedding_seed).tensor());
    }
    write_embeddings(rc.embeddings, static_cast<std::uint32_t>(rc.model.layers),
                     static_cast<std::uint32_t>(rc.model.hidden), docs);
  }
  spdlog::info("wrote {} documents to {}", records.size(), rc.corpus.string());
  return kExitOk;
}

std::string hostname() {
  char buf[256] = {};
  if (::gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

int cmd_bench(const Flags& flags, std::ostream& out) {
  bench::BenchOptions options;
  if (flags.quick) options.min_sample_ns = 5e4;
  const std::vector<std::size_t> dims = flags.quick ? std::vector<std::size_t>{8, 64} : bench::kGeometryDims;
  auto results = bench::bench_geometry(dims, 1.0, options);
  bench::BenchOptions slow = options;
  slow.warmup = 1;
  slow.min_sample_ns = 0.0;
  results.push_back(bench::bench_pipeline(bench::PipelineShape{}, slow));
  if (!flags.quick) {
    bench::PipelineShape small;
    small.tokens = 128;
    for (std::size_t threads : {1, 4}) results.push_back(bench::bench_pipeline_threads(small, 4, threads, slow));
  }
  out << bench::format_table(results);
  const std::string machine = flags.machine.empty() ? hostname() : flags.machine;
  if (flags.out) {
    Output dest(*flags.out, out);
    dest.get() << bench::to_json(results, machine).dump(2) << '\n';
    dest.finish();
  }
  if (!flags.gate) return kExitOk;
  auto violations = bench::check_envelopes(results);
  if (const unsigned hw = std::thread::hardware_concurrency(); !flags.quick && hw < 4) {
    out << "thread scaling envelope not checked: " << hw << " hardware thread(s)\n";
  }
  if (!flags.baseline.empty()) {
    std::ifstream in(flags.baseline);
    if (!in) throw IoError("cannot open baseline " + flags.baseline);
    const auto extra = bench::gate(results, nlohmann::json::parse(in));
    violations.insert(violations.end(), extra.begin(), extra.end());
  }
  for (const auto& v : violations) out << "GATE FAIL " << v << '\n';
  if (violations.empty()) out << "gate passed\n";
  return violations.empty() ? kExitOk : kExitFailure;
}

void add_config(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON file of flat settings; flags override it")->check(CLI::ExistingFile);
}
void add_threads(CLI::App* sub, Flags& f) {
  sub->add_option("--threads", f.threads, "Worker threads (default: available parallelism)");
}
void add_modes(CLI::App* sub, Flags& f) {
  sub->add_flag("--synthetic", f.synthetic, "Use deterministic synthetic embeddings");
  sub->add_flag("--euclidean", f.euclidean, "Euclidean variant (curvature 0)");
  sub->add_flag("--no-mixing", f.no_mixing, "Use only the last encoder layer");
}

}  // namespace

void configure_logging() {
  static const bool configured = [] {
    auto logger = spdlog::stderr_color_mt("hypermatch");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    return true;
  }();
  (void)configured;
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("HYPERMATCH_LOG"); env != nullptr && *env != '\0') {
    const std::string name(env);
    level = spdlog::level::from_str(name);
    if (level == spdlog::level::off && name != "off") {
      level = spdlog::level::info;
      spdlog::warn("unknown HYPERMATCH_LOG level '{}'; using info", name);
    }
  }
  spdlog::set_level(level);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keyphrase extraction by hyperbolic phrase-document matching", "hypermatch"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_config(train, f);
  train->add_option("--corpus", f.corpus, "Training corpus (JSON lines)");
  train->add_option("--validation", f.validation, "Validation corpus for early stopping");
  train->add_option("--embeddings", f.embeddings, "HMEB embedding file");
  train->add_option("--checkpoint", f.checkpoint, "Checkpoint to write");
  train->add_option("--out", f.out, "Per-epoch metrics log (JSON lines)");
  train->add_option("--seed", f.seed, "Training seed");
  train->add_flag("--resume", f.resume, "Continue from --checkpoint");
  train->add_option("--stop-after-step", f.stop_after_step, "Checkpoint and stop after this many steps");
  add_threads(train, f);
  add_modes(train, f);

  auto* extract = app.add_subcommand("extract", "Write the top-K keyphrases of every document");
  add_config(extract, f);
  extract->add_option("--corpus", f.corpus, "Corpus (JSON lines)");
  extract->add_option("--embeddings", f.embeddings, "HMEB embedding file");
  extract->add_option("--checkpoint", f.checkpoint, "Trained checkpoint");
  extract->add_option("--out", f.out, "Predictions file (default: stdout)");
  extract->add_option("--k", f.k, "Phrases per document (default 10)");
  add_threads(extract, f);
  add_modes(extract, f);

  auto* eval = app.add_subcommand("eval", "Score predictions against gold keyphrases");
  add_config(eval, f);
  eval->add_option("--corpus", f.corpus, "Corpus holding the gold keyphrases");
  eval->add_option("--predictions", f.predictions, "Predictions (JSON lines; default: stdin)");
  eval->add_option("--out", f.out, "JSON report file");
  eval->add_option("--k", f.k, "Cut-offs (default 1,3,5,10)")->delimiter(',');

  auto* selftest = app.add_subcommand("selftest", "Run the geometry and gradient property suites");
  selftest->add_option("--seed", f.seed, "Sampling seed (default 1)");
  selftest->add_option("--inject-fault", f.fault, "Swap in a broken operation")
      ->check(CLI::IsMember(fault_names()));

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and embeddings");
  add_config(synth, f);
  synth->add_option("--corpus", f.corpus, "Corpus file to write");
  synth->add_option("--embeddings", f.embeddings, "HMEB file to write");
  synth->add_option("--seed", f.seed, "Corpus seed");

  auto* bench = app.add_subcommand("bench", "Time the geometry kernel and the scoring pipeline");
  bench->add_option("--out", f.out, "Results file (JSON)");
  bench->add_option("--baseline", f.baseline, "Baseline results for --gate")->check(CLI::ExistingFile);
  bench->add_option("--machine", f.machine, "Machine tag recorded in the results");
  bench->add_flag("--gate", f.gate, "Fail on envelope or baseline regressions");
  bench->add_flag("--quick", f.quick, "Fewer dims and no thread scaling");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(f, out);
    if (*extract) return cmd_extract(f, out);
    if (*eval) return cmd_eval(f, out);
    if (*selftest) return cmd_selftest(f, out);
    if (*synth) return cmd_synth(f, out);
    if (*bench) return cmd_bench(f, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hypermatch::cli
