#pragma once
// End-to-end batch run over a run directory, one file per stage, resumable.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "acpo/atomizer.hpp"
#include "acpo/clustering.hpp"
#include "acpo/embedding.hpp"
#include "acpo/pairs.hpp"
#include "acpo/sampling.hpp"
#include "acpo/scoring.hpp"

namespace acpo {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Stage { Sample, Atomize, Embed, Cluster, Score, Pairs, Report };
inline constexpr Stage kAllStages[] = {Stage::Sample, Stage::Atomize, Stage::Embed, Stage::Cluster,
                                       Stage::Score,  Stage::Pairs,   Stage::Report};

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct RunConfig {
  std::filesystem::path questions_file;
  std::filesystem::path run_dir;
  // Overrides sampling.run_seed and strategy.rng_seed when the pipeline runs.
  std::uint64_t run_seed = 0;

  SamplingConfig sampling;
  SamplingMode sampling_mode = SamplingMode::Live;
  std::filesystem::path fixture_dir;  // replay source / record target

  EmbeddingBackend embedding = OfflineHashBackend{};
  std::filesystem::path embedding_cache;  // empty = no cache

  AtomizerConfig atomizer;
  ClusteringConfig clustering;
  ScoringConfig scoring;
  PairStrategy strategy;

  bool report_consistent_only = false;
  bool write_merge_trace = false;
  std::size_t threads = 1;
};

void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);
// Relative paths in the file resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

// Throws ConfigInvalid.
void validate(const RunConfig& c);

// Hash over everything that can change stage outputs (not run_dir, threads
// or the cache location).
std::string config_hash(const RunConfig& c);

// Throws ConfigInvalid("no questions") for an empty file.
std::vector<Question> load_questions(const std::filesystem::path& path);

struct RunLayout {
  std::filesystem::path dir;
  std::filesystem::path meta() const { return dir / "meta.json"; }
  std::filesystem::path lock() const { return dir / ".lock"; }
  std::filesystem::path responses() const { return dir / "responses.jsonl"; }
  std::filesystem::path facts() const { return dir / "facts.jsonl"; }
  std::filesystem::path embeddings() const { return dir / "embeddings.bin"; }
  std::filesystem::path embedding_ids() const { return dir / "embeddings.ids"; }
  std::filesystem::path clusters() const { return dir / "clusters.jsonl"; }
  std::filesystem::path merge_trace() const { return dir / "merge_trace.jsonl"; }
  std::filesystem::path scores() const { return dir / "scores.jsonl"; }
  std::filesystem::path pairs() const { return dir / "pairs.jsonl"; }
  std::filesystem::path report_json() const { return dir / "report.json"; }
  std::filesystem::path report_txt() const { return dir / "report.txt"; }
  std::filesystem::path report_csv() const { return dir / "report.csv"; }

  std::vector<std::filesystem::path> outputs(Stage s) const;
  bool complete(Stage s) const;
};

struct RunOptions {
  bool write_csv = false;
  // Only these stages run (their inputs must exist); empty = resume the
  // whole pipeline from the first incomplete stage.
  std::optional<Stage> only;
};

struct RunSummary {
  std::vector<Stage> executed;
  std::vector<Stage> skipped;
  std::vector<std::string> failed_questions;
};

// Holds an exclusive advisory lock on <run_dir>/.lock for its lifetime.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& path);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

// Errors: ConfigInvalid, ConfigHashMismatch, LockContention, and
// StageFailed wrapping whatever a stage threw.
RunSummary run_pipeline(const RunConfig& cfg, const RunOptions& opts = {});

}  // namespace acpo
