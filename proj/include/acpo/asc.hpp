#pragma once
// Inference-time selection: sample m answers, score them with the curation
// stack, return the highest-scoring one.

#include <vector>

#include "acpo/atomizer.hpp"
#include "acpo/clustering.hpp"
#include "acpo/embedding.hpp"
#include "acpo/sampling.hpp"
#include "acpo/scoring.hpp"

namespace acpo {

struct AscConfig {
  SamplingConfig sampling;
  AtomizerConfig atomizer;
  ClusteringConfig clustering;
  ScoringConfig scoring;
};

struct AscResult {
  ResponseSample selected;
  std::vector<ResponseSample> responses;
  std::vector<AtomicFact> facts;
  std::vector<FactCluster> clusters;
  std::vector<ScoredResponse> all_scored;
  double mean_score = 0.0;
};

// Position in `scored` of the maximal score; ties go to the lowest
// sample_index. Throws EmptyInput.
std::size_t select_best(const std::vector<ScoredResponse>& scored);

// Scores already-drawn responses of one question and selects among them.
AscResult asc_select_from(const std::vector<ResponseSample>& responses, const AscConfig& cfg,
                          const Embedder& embedder);

AscResult asc_select(const Question& q, const AscConfig& cfg, const SamplingBackend& backend,
                     const Embedder& embedder);

}  // namespace acpo
