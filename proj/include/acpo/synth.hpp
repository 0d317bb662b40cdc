#pragma once
// Synthetic factuality world: responses are assembled from a fixed pool of
// true facts plus one-off hallucinations, so the premise "frequent facts are
// true facts" can be checked against known ground truth.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acpo/clustering.hpp"
#include "acpo/embedding.hpp"
#include "acpo/pairs.hpp"
#include "acpo/scoring.hpp"
#include "acpo/types.hpp"

namespace acpo {

struct TrueFact {
  std::string text;
  double emission = 0.8;  // per-response inclusion probability
};

struct FactWorld {
  std::vector<TrueFact> true_facts;
  double hallucination_rate = 0.3;  // per-slot probability of a hallucination
  int min_facts_per_response = 10;  // slots per response, drawn uniformly
  int max_facts_per_response = 14;
  double paraphrase_noise = 0.0;    // embedding-space jitter magnitude
  double sticky_hallucination_prob = 0.0;  // chance a hallucination repeats an earlier one
  std::uint64_t seed = 0;
};

// n true facts at a shared emission probability.
FactWorld default_world(int n_true = 10, double emission = 0.8, double hallucination_rate = 0.3,
                        std::uint64_t seed = 0);

void validate(const FactWorld& w);
void to_json(json& j, const FactWorld& w);
void from_json(const json& j, FactWorld& w);

enum class FactTruth { True, Hallucinated };
std::string_view to_string(FactTruth t);

struct SimulatedQuestion {
  Question question;
  std::vector<ResponseSample> responses;
  std::map<std::string, FactTruth> ground_truth;  // fact_id -> truth
};

// Each slot is a hallucination with probability hallucination_rate, otherwise
// the next true fact from this response's emitted set (each true fact emitted
// independently by its emission probability). Fact ids follow the atomizer's
// numbering, so ground truth joins directly with facts.jsonl.
SimulatedQuestion simulate_responses(const FactWorld& world, int m, const std::string& question_id = "sim");

// Adds Gaussian noise of norm ~`magnitude` to every vector and re-normalizes.
// Deterministic per (seed, fact_id).
void jitter_embeddings(std::vector<FactEmbedding>& embeddings, double magnitude, std::uint64_t seed);

struct ResponsePrecision {
  std::string question_id;
  int sample_index = 0;
  int score = 0;
  int facts = 0;
  std::optional<double> precision;  // absent for a response with no facts
};

struct PrecisionReport {
  std::vector<ResponsePrecision> responses;
  std::optional<double> pearson;   // absent when either side has zero variance
  std::optional<double> spearman;
};

void to_json(json& j, const PrecisionReport& r);

std::optional<double> pearson_correlation(const std::vector<double>& x, const std::vector<double>& y);
std::optional<double> spearman_correlation(const std::vector<double>& x, const std::vector<double>& y);

// Throws UnknownFact when a verdict's fact is missing from ground truth.
PrecisionReport precision_report(const std::vector<ScoredResponse>& scored,
                                 const std::map<std::string, FactTruth>& ground_truth);

struct SimulationConfig {
  int m = 30;
  int trials = 100;
  int embedding_dim = 128;
  ClusteringConfig clustering;
  ScoringConfig scoring;
  PairStrategy strategy;
  std::size_t threads = 1;
};

struct SimulationRun {
  std::vector<Question> questions;  // one per trial
  std::vector<ResponseSample> responses;
  std::vector<AtomicFact> facts;
  std::vector<FactEmbedding> embeddings;
  std::vector<FactCluster> clusters;
  std::vector<ScoredResponse> scored;
  std::vector<PreferencePair> pairs;
  std::map<std::string, FactTruth> ground_truth;
  PrecisionReport precision;
};

// Trial t simulates question "sim-<t>" with seed hash(world.seed, t) and runs
// the full atomize -> embed -> cluster -> score -> pairs stack on it.
SimulationRun run_simulation(const FactWorld& world, const SimulationConfig& cfg);

}  // namespace acpo
