#include "acpo/asc.hpp"

#include "acpo/error.hpp"
#include "acpo/stages.hpp"

namespace acpo {

std::size_t select_best(const std::vector<ScoredResponse>& scored) {
  if (scored.empty()) throw Error(ErrorCode::EmptyInput, "no scored responses to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scored.size(); ++i) {
    const auto& a = scored[i];
    const auto& b = scored[best];
    if (a.score > b.score || (a.score == b.score && a.sample_index < b.sample_index)) best = i;
  }
  return best;
}

AscResult asc_select_from(const std::vector<ResponseSample>& responses, const AscConfig& cfg,
                          const Embedder& embedder) {
  if (responses.empty()) throw Error(ErrorCode::EmptyInput, "no responses to select from");
  AscResult out;
  out.responses = responses;
  out.facts = atomize_all(responses, cfg.atomizer);
  const auto embeddings = embed_all(out.facts, embedder);
  if (!embeddings.empty()) {
    out.clusters = cluster_all(out.facts, embeddings, cfg.clustering, cfg.scoring).clusters;
  }
  out.all_scored = score_all(responses, out.facts, out.clusters, cfg.scoring);

  const auto best = select_best(out.all_scored);
  for (const auto& r : responses) {
    if (r.sample_index == out.all_scored[best].sample_index) out.selected = r;
  }
  double total = 0.0;
  for (const auto& s : out.all_scored) total += s.score;
  out.mean_score = total / static_cast<double>(out.all_scored.size());
  return out;
}

AscResult asc_select(const Question& q, const AscConfig& cfg, const SamplingBackend& backend,
                     const Embedder& embedder) {
  validate(cfg.sampling, 1);
  return asc_select_from(sample_responses(q, cfg.sampling, backend), cfg, embedder);
}

}  // namespace acpo
