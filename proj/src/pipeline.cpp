#include "acpo/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "acpo/error.hpp"
#include "acpo/hashing.hpp"
#include "acpo/jsonl.hpp"
#include "acpo/reporting.hpp"
#include "acpo/stages.hpp"

namespace fs = std::filesystem;

namespace acpo {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Sample: return "sample";
    case Stage::Atomize: return "atomize";
    case Stage::Embed: return "embed";
    case Stage::Cluster: return "cluster";
    case Stage::Score: return "score";
    case Stage::Pairs: return "pairs";
    case Stage::Report: return "report";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  for (Stage st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown stage '" + std::string(s) + "'");
}

namespace {

std::string_view mode_name(SamplingMode m) {
  switch (m) {
    case SamplingMode::Live: return "live";
    case SamplingMode::Replay: return "replay";
    case SamplingMode::Record: return "record";
  }
  return "?";
}

SamplingMode mode_from_name(const std::string& s) {
  if (s == "live") return SamplingMode::Live;
  if (s == "replay") return SamplingMode::Replay;
  if (s == "record") return SamplingMode::Record;
  throw Error(ErrorCode::ConfigInvalid, "sampling mode must be live, replay or record");
}

json hashed_view(const RunConfig& c) {
  json j = c;
  j.erase("run_dir");
  j.erase("threads");
  j["embedding"].erase("cache");
  j["sampling"].erase("max_parallel");
  return j;
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
  json embedding = c.embedding;
  embedding["cache"] = c.embedding_cache.string();
  json sampling = c.sampling;
  sampling["mode"] = mode_name(c.sampling_mode);
  sampling["fixture_dir"] = c.fixture_dir.string();
  j = json{{"questions_file", c.questions_file.string()},
           {"run_dir", c.run_dir.string()},
           {"run_seed", c.run_seed},
           {"sampling", sampling},
           {"embedding", embedding},
           {"atomizer", {{"min_words", c.atomizer.min_words}}},
           {"clustering", c.clustering},
           {"scoring", c.scoring},
           {"strategy", c.strategy},
           {"report", {{"consistent_only", c.report_consistent_only}, {"merge_trace", c.write_merge_trace}}},
           {"threads", c.threads}};
}

void from_json(const json& j, RunConfig& c) {
  c = RunConfig{};
  c.questions_file = j.value("questions_file", std::string{});
  c.run_dir = j.value("run_dir", std::string{});
  c.run_seed = j.value("run_seed", std::uint64_t{0});
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    s.get_to(c.sampling);
    c.sampling_mode = mode_from_name(s.value("mode", std::string("live")));
    c.fixture_dir = s.value("fixture_dir", std::string{});
  }
  if (j.contains("embedding")) {
    const auto& e = j.at("embedding");
    e.get_to(c.embedding);
    c.embedding_cache = e.value("cache", std::string{});
  }
  if (j.contains("atomizer")) c.atomizer.min_words = j.at("atomizer").value("min_words", c.atomizer.min_words);
  if (j.contains("clustering")) j.at("clustering").get_to(c.clustering);
  if (j.contains("scoring")) j.at("scoring").get_to(c.scoring);
  if (j.contains("strategy")) j.at("strategy").get_to(c.strategy);
  if (j.contains("report")) {
    c.report_consistent_only = j.at("report").value("consistent_only", false);
    c.write_merge_trace = j.at("report").value("merge_trace", false);
  }
  c.threads = j.value("threads", std::size_t{1});
}

RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  RunConfig c;
  try {
    c = j.get<RunConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(c.questions_file);
  resolve(c.run_dir);
  resolve(c.fixture_dir);
  resolve(c.embedding_cache);
  return c;
}

void validate(const RunConfig& c) {
  if (c.questions_file.empty()) throw Error(ErrorCode::ConfigInvalid, "questions_file is required");
  if (c.run_dir.empty()) throw Error(ErrorCode::ConfigInvalid, "run_dir is required");
  if (c.threads < 1) throw Error(ErrorCode::ConfigInvalid, "threads must be >= 1");
  if (c.sampling_mode != SamplingMode::Live && c.fixture_dir.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "replay/record sampling needs sampling.fixture_dir");
  }
  if (c.atomizer.min_words < 1) throw Error(ErrorCode::ConfigInvalid, "atomizer.min_words must be >= 1");
  try {
    validate(c.sampling);
    validate(c.clustering);
    validate(c.scoring);
    validate(c.strategy);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  const bool needs_2k = c.strategy.kind == PairStrategyKind::TopKBottomK ||
                        c.strategy.kind == PairStrategyKind::LengthBalanced;
  if (needs_2k && c.sampling.m < 2 * c.strategy.k) {
    throw Error(ErrorCode::ConfigInvalid, "strategy needs m >= 2k (m=" + std::to_string(c.sampling.m) +
                                              ", k=" + std::to_string(c.strategy.k) + ")");
  }
  if (const auto* remote = std::get_if<RemoteBackend>(&c.embedding)) {
    if (remote->batch_size < 1 || remote->max_parallel < 1) {
      throw Error(ErrorCode::ConfigInvalid, "embedding batch_size and max_parallel must be >= 1");
    }
  } else if (std::get<OfflineHashBackend>(c.embedding).dim < 1) {
    throw Error(ErrorCode::ConfigInvalid, "embedding dim must be >= 1");
  }
}

std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(hashed_view(c).dump())); }

std::vector<Question> load_questions(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::ConfigInvalid, "questions file not found: " + path.string());
  std::vector<Question> qs;
  try {
    qs = read_jsonl<Question>(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
  if (qs.empty()) throw Error(ErrorCode::ConfigInvalid, "no questions");
  std::set<std::string> seen;
  for (const auto& q : qs) {
    try {
      validate(q);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigInvalid, e.what());
    }
    if (!seen.insert(q.id).second) throw Error(ErrorCode::ConfigInvalid, "duplicate question id '" + q.id + "'");
  }
  return qs;
}

std::vector<fs::path> RunLayout::outputs(Stage s) const {
  switch (s) {
    case Stage::Sample: return {responses()};
    case Stage::Atomize: return {facts()};
    case Stage::Embed: return {embeddings(), embedding_ids()};
    case Stage::Cluster: return {clusters()};
    case Stage::Score: return {scores()};
    case Stage::Pairs: return {pairs()};
    case Stage::Report: return {report_json(), report_txt()};
  }
  return {};
}

bool RunLayout::complete(Stage s) const {
  const auto files = outputs(s);
  return std::all_of(files.begin(), files.end(), [](const fs::path& p) { return fs::exists(p); });
}

RunLock::RunLock(const fs::path& path) {
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::IoWriteFailed, "open " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::LockContention, "another run holds " + path.string());
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

namespace {

class Runner {
 public:
  Runner(const RunConfig& cfg, std::vector<Question> questions, json& meta)
      : cfg_(cfg), layout_{cfg.run_dir}, questions_(std::move(questions)), meta_(meta) {
    sampling_ = cfg.sampling;
    sampling_.run_seed = cfg.run_seed;
    strategy_ = cfg.strategy;
    strategy_.rng_seed = cfg.run_seed;
  }

  void run(Stage s, const RunOptions& opts) {
    switch (s) {
      case Stage::Sample: return sample();
      case Stage::Atomize: return atomize();
      case Stage::Embed: return embed();
      case Stage::Cluster: return cluster();
      case Stage::Score: return score();
      case Stage::Pairs: return pairs();
      case Stage::Report: return report(opts);
    }
  }

 private:
  template <typename T>
  std::vector<T> input(const fs::path& p) const {
    if (!fs::exists(p)) throw Error(ErrorCode::IoReadFailed, "missing input " + p.filename().string());
    return read_jsonl<T>(p);
  }

  void sample() {
    SamplingBackend backend;
    backend.mode = cfg_.sampling_mode;
    backend.fixture_dir = cfg_.fixture_dir;
    if (backend.mode != SamplingMode::Replay) backend.api_key = api_key_from_env(sampling_.api_key_env.c_str());
    auto batch = sample_batch(questions_, sampling_, backend);
    json failed = json::array();
    for (const auto& f : batch.failures) failed.push_back({{"question_id", f.question_id}, {"reason", f.reason}});
    meta_["failed_questions"] = failed;
    if (batch.responses.empty()) throw Error(ErrorCode::EmptyInput, "every question failed to sample");
    write_jsonl(layout_.responses(), batch.responses);
  }

  void atomize() {
    const auto responses = input<ResponseSample>(layout_.responses());
    write_jsonl(layout_.facts(), atomize_all(responses, cfg_.atomizer, cfg_.threads));
  }

  void embed() {
    const auto facts = input<AtomicFact>(layout_.facts());
    std::shared_ptr<EmbeddingCache> cache;
    if (!cfg_.embedding_cache.empty()) cache = std::make_shared<EmbeddingCache>(cfg_.embedding_cache);
    std::optional<std::string> key;
    if (const auto* remote = std::get_if<RemoteBackend>(&cfg_.embedding)) {
      key = api_key_from_env(remote->api_key_env.c_str());
    }
    const Embedder embedder(cfg_.embedding, nullptr, cache, key);
    write_embeddings(layout_.embeddings(), layout_.embedding_ids(), embed_all(facts, embedder));
  }

  void cluster() {
    const auto facts = input<AtomicFact>(layout_.facts());
    if (!layout_.complete(Stage::Embed)) throw Error(ErrorCode::IoReadFailed, "missing input embeddings.bin");
    const auto embeddings = read_embeddings(layout_.embeddings(), layout_.embedding_ids());
    auto result = cluster_all(facts, embeddings, cfg_.clustering, cfg_.scoring, cfg_.threads);
    if (cfg_.write_merge_trace) write_jsonl(layout_.merge_trace(), result.trace);
    write_jsonl(layout_.clusters(), result.clusters);
  }

  void score() {
    const auto responses = input<ResponseSample>(layout_.responses());
    const auto facts = input<AtomicFact>(layout_.facts());
    const auto clusters = input<FactCluster>(layout_.clusters());
    write_jsonl(layout_.scores(), score_all(responses, facts, clusters, cfg_.scoring));
  }

  void pairs() {
    const auto responses = input<ResponseSample>(layout_.responses());
    const auto scored = input<ScoredResponse>(layout_.scores());
    std::map<std::string, std::vector<ResponseSample>> responses_by_q;
    std::map<std::string, std::vector<ScoredResponse>> scored_by_q;
    for (const auto& r : responses) responses_by_q[r.question_id].push_back(r);
    for (const auto& s : scored) scored_by_q[s.question_id].push_back(s);

    std::vector<PreferencePair> out;
    for (const auto& q : questions_) {
      auto it = responses_by_q.find(q.id);
      if (it == responses_by_q.end()) continue;  // failed during sampling
      auto pairs = curate_pairs(q, scored_by_q[q.id], it->second, strategy_);
      out.insert(out.end(), pairs.begin(), pairs.end());
    }
    write_jsonl(layout_.pairs(), out);
  }

  void report(const RunOptions& opts) {
    RunRecords run;
    run.responses = input<ResponseSample>(layout_.responses());
    run.facts = input<AtomicFact>(layout_.facts());
    run.clusters = input<FactCluster>(layout_.clusters());
    run.scores = input<ScoredResponse>(layout_.scores());
    run.pairs = input<PreferencePair>(layout_.pairs());
    const auto stats = dataset_stats(run, cfg_.report_consistent_only);
    write_file_atomic(layout_.report_json(), json(stats).dump(2) + "\n");
    write_file_atomic(layout_.report_txt(), render_text(stats));
    if (opts.write_csv) write_file_atomic(layout_.report_csv(), render_csv(stats));
  }

  const RunConfig& cfg_;
  RunLayout layout_;
  std::vector<Question> questions_;
  json& meta_;
  SamplingConfig sampling_;
  PairStrategy strategy_;
};

json fresh_meta(const RunConfig& cfg, const std::string& hash, const std::string& input_hash,
                const std::vector<Question>& questions) {
  std::set<std::string> prompts;
  for (const auto& q : questions) prompts.insert(q.system_prompt);
  json sampling_model = cfg.sampling_mode == SamplingMode::Replay
                            ? json("replay:" + cfg.fixture_dir.string())
                            : json(cfg.sampling.model_name);
  const auto now = now_utc();
  return json{{"tool", "acpo"},
              {"version", kToolVersion},
              {"config_hash", hash},
              {"questions_hash", input_hash},
              {"config", cfg},
              {"system_prompts", std::vector<std::string>(prompts.begin(), prompts.end())},
              {"models", {{"sampling", sampling_model}, {"embedding", backend_id(cfg.embedding)}}},
              {"created_at", now},
              {"updated_at", now},
              {"stages", json::object()},
              {"failed_questions", json::array()}};
}

}  // namespace

RunSummary run_pipeline(const RunConfig& cfg, const RunOptions& opts) {
  validate(cfg);
  auto questions = load_questions(cfg.questions_file);

  std::error_code ec;
  fs::create_directories(cfg.run_dir, ec);
  if (ec) throw Error(ErrorCode::ConfigInvalid, "cannot create run_dir " + cfg.run_dir.string() + ": " + ec.message());
  const RunLayout layout{cfg.run_dir};
  RunLock lock(layout.lock());

  const auto hash = config_hash(cfg);
  const auto input_hash = hex64(fnv1a64(read_file(cfg.questions_file)));
  json meta;
  bool resumed = false;
  if (fs::exists(layout.meta())) {
    try {
      meta = json::parse(read_file(layout.meta()));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, layout.meta().string() + ": " + e.what());
    }
    if (meta.value("config_hash", "") != hash) {
      throw Error(ErrorCode::ConfigHashMismatch, "run directory was produced with config " +
                                                     meta.value("config_hash", std::string("?")) + ", now " + hash);
    }
    if (meta.value("questions_hash", "") != input_hash) {
      throw Error(ErrorCode::ConfigHashMismatch, "questions file changed since this run directory was created");
    }
    resumed = true;
  } else {
    meta = fresh_meta(cfg, hash, input_hash, questions);
  }

  // Stage files without a meta.json are of unknown provenance; start over.
  std::vector<Stage> todo;
  if (opts.only) {
    todo.push_back(*opts.only);
  } else {
    bool dirty = !resumed;
    for (Stage s : kAllStages) {
      dirty = dirty || !layout.complete(s);
      if (dirty) todo.push_back(s);
    }
  }

  RunSummary summary;
  for (Stage s : kAllStages) {
    if (std::find(todo.begin(), todo.end(), s) == todo.end()) summary.skipped.push_back(s);
  }

  Runner runner(cfg, std::move(questions), meta);
  for (Stage s : todo) {
    spdlog::info("stage {}", to_string(s));
    // Invalidate downstream files first so a crash mid-stage cannot leave a
    // stale successor that looks complete.
    if (!opts.only) {
      bool after = false;
      for (Stage later : kAllStages) {
        if (later == s) after = true;
        if (!after) continue;
        for (const auto& p : layout.outputs(later)) fs::remove(p, ec);
      }
    }
    try {
      runner.run(s, opts);
    } catch (const Error& e) {
      throw Error(ErrorCode::StageFailed, "stage " + std::string(to_string(s)) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::StageFailed, "stage " + std::string(to_string(s)) + ": " + e.what());
    }
    meta["stages"][std::string(to_string(s))] = {{"completed_at", now_utc()}};
    meta["updated_at"] = now_utc();
    write_file_atomic(layout.meta(), meta.dump(2) + "\n");
    summary.executed.push_back(s);
  }
  if (todo.empty()) {
    spdlog::info("all stages complete; nothing to do");
  }
  for (const auto& f : meta.value("failed_questions", json::array())) {
    summary.failed_questions.push_back(f.value("question_id", std::string{}));
  }
  return summary;
}

}  // namespace acpo
