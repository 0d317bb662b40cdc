#include "acpo/scoring.hpp"

#include "acpo/error.hpp"

namespace acpo {

void validate(const ScoringConfig& cfg) {
  if (cfg.theta < 0) throw Error(ErrorCode::ConfigInvalid, "scoring: theta must be >= 0");
}

void to_json(json& j, const ScoringConfig& c) {
  j = json{{"theta", c.theta},
           {"penalty_enabled", c.penalty_enabled},
           {"comparison", c.comparison == ThetaComparison::Strict ? "strict" : "inclusive"}};
}

void from_json(const json& j, ScoringConfig& c) {
  const ScoringConfig d;
  c.theta = j.value("theta", d.theta);
  c.penalty_enabled = j.value("penalty_enabled", d.penalty_enabled);
  const auto cmp = j.value("comparison", std::string("strict"));
  if (cmp == "strict") {
    c.comparison = ThetaComparison::Strict;
  } else if (cmp == "inclusive") {
    c.comparison = ThetaComparison::Inclusive;
  } else {
    throw Error(ErrorCode::ConfigInvalid, "scoring: comparison must be 'strict' or 'inclusive'");
  }
}

ClusterLabel classify_size(std::size_t size, const ScoringConfig& cfg) {
  const auto theta = static_cast<std::size_t>(cfg.theta);
  const bool consistent = cfg.comparison == ThetaComparison::Strict ? size > theta : size >= theta;
  return consistent ? ClusterLabel::Consistent : ClusterLabel::NonConsistent;
}

std::vector<FactCluster> classify_clusters(const std::string& question_id,
                                           const std::vector<std::vector<std::string>>& partition,
                                           const ScoringConfig& cfg) {
  validate(cfg);
  std::vector<FactCluster> out;
  out.reserve(partition.size());
  for (std::size_t i = 0; i < partition.size(); ++i) {
    FactCluster c;
    c.question_id = question_id;
    c.cluster_id = static_cast<int>(i);
    c.member_fact_ids = partition[i];
    validate(c);
    c.label = classify_size(c.size(), cfg);
    out.push_back(std::move(c));
  }
  return out;
}

LabelIndex index_labels(const std::vector<FactCluster>& clusters) {
  LabelIndex index;
  for (const auto& c : clusters) {
    for (const auto& id : c.member_fact_ids) index.emplace(id, c.label);
  }
  return index;
}

ScoredResponse score_response(const std::string& question_id, int sample_index,
                              const std::vector<AtomicFact>& facts, const LabelIndex& labels,
                              const ScoringConfig& cfg) {
  ScoredResponse out;
  out.question_id = question_id;
  out.sample_index = sample_index;
  out.verdicts.reserve(facts.size());
  for (const auto& f : facts) {
    int delta = 0;
    if (!f.excluded) {
      auto it = labels.find(f.fact_id);
      if (it == labels.end()) throw Error(ErrorCode::UnclusteredFact, "fact " + f.fact_id + " has no cluster");
      if (it->second == ClusterLabel::Consistent) {
        delta = 1;
      } else if (cfg.penalty_enabled) {
        delta = -1;
      }
    }
    out.score += delta;
    out.verdicts.push_back({f.fact_id, delta});
  }
  return out;
}

}  // namespace acpo
