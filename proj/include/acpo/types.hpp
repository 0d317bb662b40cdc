#pragma once
// Domain model shared by every pipeline stage. All records serialize to one
// JSON object per line; key names are the on-disk schema.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace acpo {

using json = nlohmann::json;

inline constexpr std::string_view kDefaultSystemPrompt =
    "You are an intelligent assistant who answers questions accurately.";

struct Question {
  std::string id;
  std::string prompt_text;
  std::string system_prompt{kDefaultSystemPrompt};

  bool operator==(const Question&) const = default;
};

struct ResponseSample {
  std::string question_id;
  int sample_index = 0;
  std::string text;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  std::size_t char_length = 0;  // code points in `text`

  bool operator==(const ResponseSample&) const = default;
};

ResponseSample make_response(std::string question_id, int sample_index, std::string text,
                             double temperature, std::uint64_t seed);

struct AtomicFact {
  std::string fact_id;
  std::string question_id;
  int sample_index = 0;
  int position = 0;
  std::string text;
  bool excluded = false;  // too short to carry a fact; scores 0

  bool operator==(const AtomicFact&) const = default;
};

std::string make_fact_id(std::string_view question_id, int sample_index, int position);

enum class ClusterLabel { Consistent, NonConsistent };

std::string_view to_string(ClusterLabel label);
ClusterLabel cluster_label_from_string(std::string_view s);

struct FactCluster {
  std::string question_id;
  int cluster_id = 0;
  std::vector<std::string> member_fact_ids;
  ClusterLabel label = ClusterLabel::NonConsistent;

  std::size_t size() const { return member_fact_ids.size(); }
  bool operator==(const FactCluster&) const = default;
};

struct FactVerdict {
  std::string fact_id;
  int delta = 0;  // +1, -1 or 0

  bool operator==(const FactVerdict&) const = default;
};

struct ScoredResponse {
  std::string question_id;
  int sample_index = 0;
  int score = 0;
  std::vector<FactVerdict> verdicts;

  bool operator==(const ScoredResponse&) const = default;
};

struct PreferencePair {
  std::string question_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  int chosen_score = 0;
  int rejected_score = 0;
  int chosen_index = 0;
  int rejected_index = 0;
  std::string strategy;

  // Stable key used to join pairs with externally produced log-probs.
  std::string pair_id() const;
  bool operator==(const PreferencePair&) const = default;
};

struct FactEmbedding {
  std::string fact_id;
  std::vector<float> vector;

  std::size_t dim() const { return vector.size(); }
  bool operator==(const FactEmbedding&) const = default;
};

// Invariant checks; throw Error(InvalidArgument) on violation.
void validate(const Question& q);
void validate(const ResponseSample& r);
void validate(const AtomicFact& f);
void validate(const FactCluster& c);
void validate(const ScoredResponse& s);
void validate(const PreferencePair& p);

// Checks sample indices for one question are exactly 0..n-1 in some order.
void validate_sample_indices(const std::vector<ResponseSample>& samples);

std::size_t utf8_length(std::string_view s);

void to_json(json& j, const Question& q);
void from_json(const json& j, Question& q);
void to_json(json& j, const ResponseSample& r);
void from_json(const json& j, ResponseSample& r);
void to_json(json& j, const AtomicFact& f);
void from_json(const json& j, AtomicFact& f);
void to_json(json& j, const FactCluster& c);
void from_json(const json& j, FactCluster& c);
void to_json(json& j, const FactVerdict& v);
void from_json(const json& j, FactVerdict& v);
void to_json(json& j, const ScoredResponse& s);
void from_json(const json& j, ScoredResponse& s);
void to_json(json& j, const PreferencePair& p);
void from_json(const json& j, PreferencePair& p);

}  // namespace acpo
