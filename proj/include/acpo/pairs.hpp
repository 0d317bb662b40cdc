#pragma once
// Turn scored responses into (prompt, chosen, rejected) pairs.

#include <cstdint>
#include <string>
#include <vector>

#include "acpo/types.hpp"

namespace acpo {

enum class PairStrategyKind { Top1Bottom1, TopKBottomK, LengthBalanced, LongestPreferred, ShortestPreferred };
enum class LengthDirection { Longest, Shortest };

struct PairStrategy {
  PairStrategyKind kind = PairStrategyKind::Top1Bottom1;
  int k = 5;            // TopKBottomK, LengthBalanced
  int replaced = 1;     // LengthBalanced: rejected slots picked by length
  LengthDirection direction = LengthDirection::Longest;
  std::uint64_t rng_seed = 0;  // Longest/ShortestPreferred negatives

  bool operator==(const PairStrategy&) const = default;
};

void validate(const PairStrategy& s);
void to_json(json& j, const PairStrategy& s);
void from_json(const json& j, PairStrategy& s);

// Identifier written to every pair, e.g. "top5_bottom5" or
// "length_balanced_5_4+1_longest".
std::string strategy_id(const PairStrategy& s);

bool is_score_based(PairStrategyKind kind);

// `scored` and `responses` cover the same m samples of question `q`.
// Score-based strategies emit nothing when every score ties.
// Throws InsufficientResponses when m < 2k (or m < 2).
std::vector<PreferencePair> curate_pairs(const Question& q, const std::vector<ScoredResponse>& scored,
                                         const std::vector<ResponseSample>& responses,
                                         const PairStrategy& strategy);

}  // namespace acpo
