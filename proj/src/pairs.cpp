#include "acpo/pairs.hpp"

#include <algorithm>
#include <map>

#include "acpo/error.hpp"
#include "acpo/hashing.hpp"

namespace acpo {

void validate(const PairStrategy& s) {
  if (s.k < 1) throw Error(ErrorCode::ConfigInvalid, "strategy: k must be >= 1");
  if (s.kind == PairStrategyKind::LengthBalanced && (s.replaced < 1 || s.replaced > 2 || s.replaced > s.k)) {
    throw Error(ErrorCode::ConfigInvalid, "strategy: replaced must be 1 or 2");
  }
}

namespace {

constexpr std::pair<PairStrategyKind, const char*> kKindNames[] = {
    {PairStrategyKind::Top1Bottom1, "top1_bottom1"},
    {PairStrategyKind::TopKBottomK, "topk_bottomk"},
    {PairStrategyKind::LengthBalanced, "length_balanced"},
    {PairStrategyKind::LongestPreferred, "longest_preferred"},
    {PairStrategyKind::ShortestPreferred, "shortest_preferred"},
};

const char* kind_name(PairStrategyKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

}  // namespace

void to_json(json& j, const PairStrategy& s) {
  j = json{{"kind", kind_name(s.kind)},
           {"k", s.k},
           {"replaced", s.replaced},
           {"direction", s.direction == LengthDirection::Longest ? "longest" : "shortest"},
           {"rng_seed", s.rng_seed}};
}

void from_json(const json& j, PairStrategy& s) {
  const PairStrategy d;
  const auto kind = j.value("kind", std::string(kind_name(d.kind)));
  const auto it = std::find_if(std::begin(kKindNames), std::end(kKindNames),
                               [&](const auto& e) { return kind == e.second; });
  if (it == std::end(kKindNames)) throw Error(ErrorCode::ConfigInvalid, "unknown strategy '" + kind + "'");
  s.kind = it->first;
  s.k = j.value("k", d.k);
  s.replaced = j.value("replaced", d.replaced);
  const auto dir = j.value("direction", std::string("longest"));
  if (dir != "longest" && dir != "shortest") {
    throw Error(ErrorCode::ConfigInvalid, "strategy direction must be 'longest' or 'shortest'");
  }
  s.direction = dir == "longest" ? LengthDirection::Longest : LengthDirection::Shortest;
  s.rng_seed = j.value("rng_seed", d.rng_seed);
}

std::string strategy_id(const PairStrategy& s) {
  const char* dir = s.direction == LengthDirection::Longest ? "longest" : "shortest";
  switch (s.kind) {
    case PairStrategyKind::Top1Bottom1: return "top1_bottom1";
    case PairStrategyKind::TopKBottomK: return "top" + std::to_string(s.k) + "_bottom" + std::to_string(s.k);
    case PairStrategyKind::LengthBalanced:
      return "length_balanced_" + std::to_string(s.k) + "_" + std::to_string(s.k - s.replaced) + "+" +
             std::to_string(s.replaced) + "_" + dir;
    case PairStrategyKind::LongestPreferred: return "longest_preferred";
    case PairStrategyKind::ShortestPreferred: return "shortest_preferred";
  }
  return "unknown";
}

bool is_score_based(PairStrategyKind kind) {
  return kind != PairStrategyKind::LongestPreferred && kind != PairStrategyKind::ShortestPreferred;
}

namespace {

struct Candidate {
  int index;
  int score;
  std::size_t length;
  const ResponseSample* response;
};

// Best first: score descending, then sample_index ascending.
bool better(const Candidate& a, const Candidate& b) {
  return a.score != b.score ? a.score > b.score : a.index < b.index;
}

// Worst first: score ascending, then sample_index ascending.
bool worse(const Candidate& a, const Candidate& b) {
  return a.score != b.score ? a.score < b.score : a.index < b.index;
}

bool longer(const Candidate& a, const Candidate& b) {
  return a.length != b.length ? a.length > b.length : a.index < b.index;
}

bool shorter(const Candidate& a, const Candidate& b) {
  return a.length != b.length ? a.length < b.length : a.index < b.index;
}

std::vector<Candidate> join(const std::vector<ScoredResponse>& scored, const std::vector<ResponseSample>& responses,
                            const std::string& question_id) {
  std::map<int, const ResponseSample*> by_index;
  for (const auto& r : responses) {
    if (r.question_id != question_id) {
      throw Error(ErrorCode::InvalidArgument, "response for question '" + r.question_id + "' passed with '" +
                                                  question_id + "'");
    }
    by_index[r.sample_index] = &r;
  }
  if (by_index.size() != responses.size() || scored.size() != responses.size()) {
    throw Error(ErrorCode::InvalidArgument, "scores do not cover the responses of '" + question_id + "'");
  }
  std::vector<Candidate> out;
  out.reserve(scored.size());
  for (const auto& s : scored) {
    auto it = by_index.find(s.sample_index);
    if (it == by_index.end() || s.question_id != question_id) {
      throw Error(ErrorCode::InvalidArgument, "score without a matching response in '" + question_id + "'");
    }
    out.push_back({s.sample_index, s.score, it->second->char_length, it->second});
  }
  return out;
}

PreferencePair make_pair(const Question& q, const Candidate& chosen, const Candidate& rejected,
                         const std::string& strategy) {
  PreferencePair p;
  p.question_id = q.id;
  p.prompt = q.prompt_text;
  p.chosen = chosen.response->text;
  p.rejected = rejected.response->text;
  p.chosen_score = chosen.score;
  p.rejected_score = rejected.score;
  p.chosen_index = chosen.index;
  p.rejected_index = rejected.index;
  p.strategy = strategy;
  return p;
}

void require_m(std::size_t m, std::size_t needed, const std::string& qid) {
  if (m < needed) {
    throw Error(ErrorCode::InsufficientResponses, "question '" + qid + "' has " + std::to_string(m) +
                                                      " responses, strategy needs " + std::to_string(needed));
  }
}

}  // namespace

std::vector<PreferencePair> curate_pairs(const Question& q, const std::vector<ScoredResponse>& scored,
                                         const std::vector<ResponseSample>& responses,
                                         const PairStrategy& strategy) {
  validate(strategy);
  auto candidates = join(scored, responses, q.id);
  const std::size_t m = candidates.size();
  const std::string sid = strategy_id(strategy);
  std::vector<PreferencePair> pairs;

  if (!is_score_based(strategy.kind)) {
    require_m(m, 2, q.id);
    const auto pick = strategy.kind == PairStrategyKind::LongestPreferred ? longer : shorter;
    std::sort(candidates.begin(), candidates.end(), pick);
    CounterRng rng(hash_combine(strategy.rng_seed, fnv1a64(q.id)));
    const auto& negative = candidates[1 + rng.below(m - 1)];
    pairs.push_back(make_pair(q, candidates.front(), negative, sid));
    return pairs;
  }

  const std::size_t k = strategy.kind == PairStrategyKind::Top1Bottom1 ? 1 : static_cast<std::size_t>(strategy.k);
  require_m(m, std::max<std::size_t>(2, 2 * k), q.id);

  const auto [lo, hi] = std::minmax_element(candidates.begin(), candidates.end(),
                                            [](const auto& a, const auto& b) { return a.score < b.score; });
  if (lo->score == hi->score) return pairs;

  std::sort(candidates.begin(), candidates.end(), better);
  const std::vector<Candidate> top(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<Candidate> rest(candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end());
  std::sort(rest.begin(), rest.end(), worse);

  std::vector<Candidate> bottom;
  if (strategy.kind == PairStrategyKind::LengthBalanced) {
    const std::size_t by_score = k - static_cast<std::size_t>(strategy.replaced);
    bottom.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(by_score));
    std::vector<Candidate> pool(rest.begin() + static_cast<std::ptrdiff_t>(by_score), rest.end());
    std::sort(pool.begin(), pool.end(), strategy.direction == LengthDirection::Longest ? longer : shorter);
    bottom.insert(bottom.end(), pool.begin(), pool.begin() + strategy.replaced);
  } else {
    bottom.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(k));
  }

  for (const auto& c : top) {
    for (const auto& r : bottom) pairs.push_back(make_pair(q, c, r, sid));
  }
  return pairs;
}

}  // namespace acpo
