// acpo: sample, score and pair long-form answers by atomic self-consistency.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "acpo/asc.hpp"
#include "acpo/dpo.hpp"
#include "acpo/error.hpp"
#include "acpo/jsonl.hpp"
#include "acpo/pipeline.hpp"
#include "acpo/reporting.hpp"
#include "acpo/synth.hpp"

namespace fs = std::filesystem;
using namespace acpo;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;
constexpr int kExitLock = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::ConfigHashMismatch:
    case ErrorCode::InvalidArgument:
      return kExitConfig;
    case ErrorCode::LockContention:
      return kExitLock;
    default:
      return kExitStage;
  }
}

struct RunFlags {
  fs::path config;
  fs::path run_dir;
  fs::path replay_dir;
  fs::path record_dir;
  std::size_t threads = 0;
  bool csv = false;
  bool consistent_only = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool report_flags) {
  cmd->add_option("-c,--config", f.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--run-dir", f.run_dir, "override run_dir");
  auto* replay = cmd->add_option("--replay-dir", f.replay_dir, "replay recorded responses from this directory");
  cmd->add_option("--record-dir", f.record_dir, "record live responses into this directory")->excludes(replay);
  cmd->add_option("--threads", f.threads, "worker threads for atomize/cluster");
  if (report_flags) {
    cmd->add_flag("--csv", f.csv, "also write report.csv");
    cmd->add_flag("--consistent-only", f.consistent_only, "ARC counts only consistent clusters");
  }
}

RunConfig resolve_config(const RunFlags& f) {
  auto cfg = load_run_config(f.config);
  if (!f.run_dir.empty()) cfg.run_dir = f.run_dir;
  if (!f.replay_dir.empty()) {
    cfg.sampling_mode = SamplingMode::Replay;
    cfg.fixture_dir = f.replay_dir;
  }
  if (!f.record_dir.empty()) {
    cfg.sampling_mode = SamplingMode::Record;
    cfg.fixture_dir = f.record_dir;
  }
  if (f.threads > 0) cfg.threads = f.threads;
  if (f.consistent_only) cfg.report_consistent_only = true;
  return cfg;
}

void print_summary(const RunSummary& s) {
  auto names = [](const std::vector<Stage>& v) {
    std::string out;
    for (Stage st : v) out += (out.empty() ? "" : ",") + std::string(to_string(st));
    return out.empty() ? std::string("-") : out;
  };
  std::cout << "executed: " << names(s.executed) << "\nskipped:  " << names(s.skipped) << '\n';
  if (!s.failed_questions.empty()) std::cout << "failed questions: " << s.failed_questions.size() << '\n';
}

int cmd_asc_select(const fs::path& config_path, const fs::path& question_file, const fs::path& out_dir,
                   const RunFlags& f) {
  auto cfg = load_run_config(config_path);
  if (!f.replay_dir.empty()) {
    cfg.sampling_mode = SamplingMode::Replay;
    cfg.fixture_dir = f.replay_dir;
  }
  if (!f.record_dir.empty()) {
    cfg.sampling_mode = SamplingMode::Record;
    cfg.fixture_dir = f.record_dir;
  }
  AscConfig asc{cfg.sampling, cfg.atomizer, cfg.clustering, cfg.scoring};
  asc.sampling.run_seed = cfg.run_seed;
  validate(asc.sampling, 1);

  SamplingBackend backend;
  backend.mode = cfg.sampling_mode;
  backend.fixture_dir = cfg.fixture_dir;
  if (backend.mode != SamplingMode::Replay) backend.api_key = api_key_from_env(asc.sampling.api_key_env.c_str());
  std::shared_ptr<EmbeddingCache> cache;
  if (!cfg.embedding_cache.empty()) cache = std::make_shared<EmbeddingCache>(cfg.embedding_cache);
  std::optional<std::string> key;
  if (const auto* remote = std::get_if<RemoteBackend>(&cfg.embedding)) key = api_key_from_env(remote->api_key_env.c_str());
  const Embedder embedder(cfg.embedding, nullptr, cache, key);

  const auto questions = load_questions(question_file);
  fs::create_directories(out_dir);
  std::vector<json> selected;
  std::vector<ScoredResponse> scores;
  for (const auto& q : questions) {
    const auto r = asc_select(q, asc, backend, embedder);
    const auto best = std::find_if(r.all_scored.begin(), r.all_scored.end(), [&](const ScoredResponse& s) {
      return s.sample_index == r.selected.sample_index;
    });
    selected.push_back({{"question_id", q.id},
                        {"sample_index", r.selected.sample_index},
                        {"text", r.selected.text},
                        {"score", best->score},
                        {"mean_score", r.mean_score}});
    scores.insert(scores.end(), r.all_scored.begin(), r.all_scored.end());
  }
  write_jsonl(out_dir / "selected.jsonl", selected);
  write_jsonl(out_dir / "scores.jsonl", scores);
  std::cout << "selected " << selected.size() << " responses into " << out_dir.string() << '\n';
  return 0;
}

struct SimulateFlags {
  fs::path world_config;
  fs::path out;
  int trials = 100;
  int m = 30;
  int dim = 128;
  std::size_t threads = 1;
  int theta = 1;
};

int cmd_simulate(const SimulateFlags& f) {
  FactWorld world = default_world();
  if (!f.world_config.empty()) {
    try {
      world = json::parse(read_file(f.world_config)).get<FactWorld>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, f.world_config.string() + ": " + e.what());
    }
  }
  SimulationConfig cfg;
  cfg.trials = f.trials;
  cfg.m = f.m;
  cfg.embedding_dim = f.dim;
  cfg.threads = f.threads;
  cfg.scoring.theta = f.theta;
  const auto run = run_simulation(world, cfg);

  fs::create_directories(f.out);
  write_jsonl(f.out / "questions.jsonl", run.questions);
  write_jsonl(f.out / "responses.jsonl", run.responses);
  write_jsonl(f.out / "facts.jsonl", run.facts);
  write_embeddings(f.out / "embeddings.bin", f.out / "embeddings.ids", run.embeddings);
  write_jsonl(f.out / "clusters.jsonl", run.clusters);
  write_jsonl(f.out / "scores.jsonl", run.scored);
  write_jsonl(f.out / "pairs.jsonl", run.pairs);
  std::vector<json> truth;
  for (const auto& [id, t] : run.ground_truth) truth.push_back({{"fact_id", id}, {"truth", to_string(t)}});
  write_jsonl(f.out / "ground_truth.jsonl", truth);
  write_file_atomic(f.out / "precision.json", json(run.precision).dump(2) + "\n");
  write_file_atomic(f.out / "world.json", json(world).dump(2) + "\n");

  RunRecords records{run.responses, run.facts, run.clusters, run.scored, run.pairs};
  const auto stats = dataset_stats(records);
  write_file_atomic(f.out / "report.json", json(stats).dump(2) + "\n");
  write_file_atomic(f.out / "report.txt", render_text(stats));

  std::cout << render_text(stats);
  auto fmt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("NOT_APPLICABLE"); };
  std::cout << "\npearson(score, precision)  " << fmt(run.precision.pearson)
            << "\nspearman(score, precision) " << fmt(run.precision.spearman) << '\n';
  return 0;
}

int cmd_dpo_eval(const fs::path& pairs_path, const fs::path& logprobs_path, const std::string& mode, double beta) {
  const auto pairs = read_jsonl<PreferencePair>(pairs_path);
  const auto logprobs = read_jsonl<LogProbRecord>(logprobs_path);
  const auto summary = batch_dpo_report(pairs, logprobs, log_prob_mode_from_string(mode), beta);
  std::cout << json(summary).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Atomic-consistency preference data curation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run every stage, resuming an existing run directory");
  add_run_flags(run, run_flags, true);

  std::map<CLI::App*, Stage> stage_cmds;
  for (Stage s : kAllStages) {
    auto* cmd = app.add_subcommand(std::string(to_string(s)), "run only the " + std::string(to_string(s)) + " stage");
    add_run_flags(cmd, run_flags, s == Stage::Report);
    stage_cmds[cmd] = s;
  }

  fs::path asc_config, asc_questions, asc_out;
  auto* asc = app.add_subcommand("asc-select", "pick the most self-consistent of m samples per question");
  asc->add_option("-c,--config", asc_config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  asc->add_option("--question-file", asc_questions, "questions.jsonl")->required()->check(CLI::ExistingFile);
  asc->add_option("--out", asc_out, "output directory")->required();
  auto* asc_replay = asc->add_option("--replay-dir", run_flags.replay_dir, "replay recorded responses");
  asc->add_option("--record-dir", run_flags.record_dir, "record live responses")->excludes(asc_replay);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "run the stack on a synthetic fact world with ground truth");
  simulate->add_option("--world-config", sim.world_config, "world (JSON); default world when omitted")
      ->check(CLI::ExistingFile);
  simulate->add_option("--trials", sim.trials, "independent questions")->check(CLI::PositiveNumber);
  simulate->add_option("--m", sim.m, "responses per question")->check(CLI::Range(2, 1000000));
  simulate->add_option("--dim", sim.dim, "embedding dimension")->check(CLI::PositiveNumber);
  simulate->add_option("--theta", sim.theta, "consistency threshold")->check(CLI::NonNegativeNumber);
  simulate->add_option("--threads", sim.threads, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim.out, "output directory")->required();

  fs::path dpo_pairs, dpo_logprobs;
  std::string dpo_mode = "total";
  double dpo_beta = 0.1;
  auto* dpo = app.add_subcommand("dpo-eval", "DPO loss over pairs given per-token log-probs");
  dpo->add_option("--pairs", dpo_pairs, "pairs.jsonl")->required()->check(CLI::ExistingFile);
  dpo->add_option("--logprobs", dpo_logprobs, "log-prob records keyed by pair_id")->required()->check(CLI::ExistingFile);
  dpo->add_option("--mode", dpo_mode, "total or average")->check(CLI::IsMember({"total", "average"}));
  dpo->add_option("--beta", dpo_beta, "DPO temperature");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run) {
      RunOptions opts;
      opts.write_csv = run_flags.csv;
      print_summary(run_pipeline(resolve_config(run_flags), opts));
      return 0;
    }
    for (const auto& [cmd, stage] : stage_cmds) {
      if (!*cmd) continue;
      RunOptions opts;
      opts.write_csv = run_flags.csv;
      opts.only = stage;
      print_summary(run_pipeline(resolve_config(run_flags), opts));
      return 0;
    }
    if (*asc) return cmd_asc_select(asc_config, asc_questions, asc_out, run_flags);
    if (*simulate) return cmd_simulate(sim);
    if (*dpo) return cmd_dpo_eval(dpo_pairs, dpo_logprobs, dpo_mode, dpo_beta);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitStage;
  }
  return 0;
}
