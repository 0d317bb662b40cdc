#include "acpo/stages.hpp"

#include <map>
#include <unordered_map>

#include "acpo/error.hpp"
#include "acpo/parallel.hpp"

namespace acpo {

std::vector<AtomicFact> atomize_all(const std::vector<ResponseSample>& responses, const AtomizerConfig& cfg,
                                    std::size_t threads) {
  std::vector<std::vector<AtomicFact>> per_response(responses.size());
  parallel_for(responses.size(), threads, [&](std::size_t i) {
    try {
      per_response[i] = split_into_facts(responses[i], cfg);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSentences) throw;
    }
  });
  std::vector<AtomicFact> out;
  for (auto& facts : per_response) {
    for (auto& f : facts) out.push_back(std::move(f));
  }
  return out;
}

std::vector<FactEmbedding> embed_all(const std::vector<AtomicFact>& facts, const Embedder& embedder) {
  std::vector<AtomicFact> kept;
  for (const auto& f : facts) {
    if (!f.excluded) kept.push_back(f);
  }
  return embedder.embed_facts(kept);
}

ClusterStageResult cluster_all(const std::vector<AtomicFact>& facts, const std::vector<FactEmbedding>& embeddings,
                               const ClusteringConfig& clustering, const ScoringConfig& scoring,
                               std::size_t threads) {
  std::unordered_map<std::string, const FactEmbedding*> by_fact;
  for (const auto& e : embeddings) by_fact.emplace(e.fact_id, &e);

  std::vector<std::string> order;
  std::map<std::string, std::vector<FactEmbedding>> groups;
  for (const auto& f : facts) {
    if (f.excluded) continue;
    auto it = by_fact.find(f.fact_id);
    if (it == by_fact.end()) throw Error(ErrorCode::InconsistentRun, "fact " + f.fact_id + " has no embedding");
    auto [g, inserted] = groups.try_emplace(f.question_id);
    if (inserted) order.push_back(f.question_id);
    g->second.push_back(*it->second);
  }

  std::vector<FactPartition> partitions(order.size());
  parallel_for(order.size(), threads, [&](std::size_t i) {
    partitions[i] = cluster_embeddings(groups.at(order[i]), clustering);
  });

  ClusterStageResult out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& qid = order[i];
    auto labeled = classify_clusters(qid, partitions[i].clusters, scoring);
    out.clusters.insert(out.clusters.end(), labeled.begin(), labeled.end());
    const auto& members = groups.at(qid);
    for (const auto& m : partitions[i].trace) {
      out.trace.push_back(json{{"question_id", qid},
                               {"step", m.step},
                               {"merged", {members[m.first].fact_id, members[m.second].fact_id}},
                               {"distance", m.distance}});
    }
  }
  return out;
}

std::vector<ScoredResponse> score_all(const std::vector<ResponseSample>& responses,
                                      const std::vector<AtomicFact>& facts,
                                      const std::vector<FactCluster>& clusters, const ScoringConfig& cfg) {
  const LabelIndex labels = index_labels(clusters);
  std::map<std::pair<std::string, int>, std::vector<AtomicFact>> by_response;
  for (const auto& f : facts) by_response[{f.question_id, f.sample_index}].push_back(f);

  std::vector<ScoredResponse> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    auto it = by_response.find({r.question_id, r.sample_index});
    static const std::vector<AtomicFact> kNoFacts;
    auto& response_facts = it == by_response.end() ? kNoFacts : it->second;
    out.push_back(score_response(r.question_id, r.sample_index, response_facts, labels, cfg));
  }
  return out;
}

}  // namespace acpo
