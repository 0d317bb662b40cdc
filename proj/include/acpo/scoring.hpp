#pragma once
// Label clusters by size against theta, then score each response
// as the sum of its facts' verdicts (+1 consistent, -1 non-consistent,
// 0 excluded).

#include <string>
#include <unordered_map>
#include <vector>

#include "acpo/types.hpp"

namespace acpo {

// Strict: consistent iff size > theta (default; theta = 1 flags exactly the
// singletons). Inclusive: consistent iff size >= theta.
enum class ThetaComparison { Strict, Inclusive };

struct ScoringConfig {
  int theta = 1;
  bool penalty_enabled = true;
  ThetaComparison comparison = ThetaComparison::Strict;
  bool operator==(const ScoringConfig&) const = default;
};

void validate(const ScoringConfig& cfg);
void to_json(json& j, const ScoringConfig& c);
void from_json(const json& j, ScoringConfig& c);

ClusterLabel classify_size(std::size_t size, const ScoringConfig& cfg);

// Cluster ids follow the partition order.
std::vector<FactCluster> classify_clusters(const std::string& question_id,
                                           const std::vector<std::vector<std::string>>& partition,
                                           const ScoringConfig& cfg);

using LabelIndex = std::unordered_map<std::string, ClusterLabel>;

LabelIndex index_labels(const std::vector<FactCluster>& clusters);

// `facts` are one response's facts in position order. Throws UnclusteredFact
// when a non-excluded fact has no label.
ScoredResponse score_response(const std::string& question_id, int sample_index,
                              const std::vector<AtomicFact>& facts, const LabelIndex& labels,
                              const ScoringConfig& cfg);

}  // namespace acpo
