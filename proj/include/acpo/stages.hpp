#pragma once
// Whole-run stage functions over flat record lists. The batch pipeline and
// inference-time selection both go through these, so they score identically.

#include <cstddef>
#include <vector>

#include "acpo/atomizer.hpp"
#include "acpo/clustering.hpp"
#include "acpo/embedding.hpp"
#include "acpo/scoring.hpp"
#include "acpo/types.hpp"

namespace acpo {

// Degenerate responses (no sentences) contribute no facts and score 0.
std::vector<AtomicFact> atomize_all(const std::vector<ResponseSample>& responses, const AtomizerConfig& cfg,
                                    std::size_t threads = 1);

// Embeds every non-excluded fact, in input order.
std::vector<FactEmbedding> embed_all(const std::vector<AtomicFact>& facts, const Embedder& embedder);

struct ClusterStageResult {
  std::vector<FactCluster> clusters;  // grouped by question in first-seen order
  std::vector<json> trace;            // {"question_id","step","merged":[a,b],"distance"}
};

// Clusters each question's embedded facts independently and labels clusters.
ClusterStageResult cluster_all(const std::vector<AtomicFact>& facts, const std::vector<FactEmbedding>& embeddings,
                               const ClusteringConfig& clustering, const ScoringConfig& scoring,
                               std::size_t threads = 1);

// One ScoredResponse per response, same order as `responses`.
std::vector<ScoredResponse> score_all(const std::vector<ResponseSample>& responses,
                                      const std::vector<AtomicFact>& facts,
                                      const std::vector<FactCluster>& clusters, const ScoringConfig& cfg);

}  // namespace acpo
