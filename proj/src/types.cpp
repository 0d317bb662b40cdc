#include "acpo/types.hpp"

#include <algorithm>
#include <cctype>

#include "acpo/error.hpp"

namespace acpo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::EndpointUnreachable: return "ENDPOINT_UNREACHABLE";
    case ErrorCode::EmptyCompletion: return "EMPTY_COMPLETION";
    case ErrorCode::FixtureMiss: return "FIXTURE_MISS";
    case ErrorCode::IoReadFailed: return "IO_READ_FAILED";
    case ErrorCode::IoWriteFailed: return "IO_WRITE_FAILED";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::NoSentences: return "NO_SENTENCES";
    case ErrorCode::DimMismatch: return "DIM_MISMATCH";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::UnclusteredFact: return "UNCLUSTERED_FACT";
    case ErrorCode::InsufficientResponses: return "INSUFFICIENT_RESPONSES";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::NonpositiveBeta: return "NONPOSITIVE_BETA";
    case ErrorCode::MissingLogprobs: return "MISSING_LOGPROBS";
    case ErrorCode::UnknownFact: return "UNKNOWN_FACT";
    case ErrorCode::InconsistentRun: return "INCONSISTENT_RUN";
    case ErrorCode::ConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::ConfigHashMismatch: return "CONFIG_HASH_MISMATCH";
    case ErrorCode::StageFailed: return "STAGE_FAILED";
    case ErrorCode::LockContention: return "LOCK_CONTENTION";
  }
  return "UNKNOWN";
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

ResponseSample make_response(std::string question_id, int sample_index, std::string text,
                             double temperature, std::uint64_t seed) {
  ResponseSample r;
  r.question_id = std::move(question_id);
  r.sample_index = sample_index;
  r.char_length = utf8_length(text);
  r.text = std::move(text);
  r.temperature = temperature;
  r.seed = seed;
  return r;
}

std::string make_fact_id(std::string_view question_id, int sample_index, int position) {
  return std::string(question_id) + ":" + std::to_string(sample_index) + ":" +
         std::to_string(position);
}

std::string_view to_string(ClusterLabel label) {
  return label == ClusterLabel::Consistent ? "CONSISTENT" : "NON_CONSISTENT";
}

ClusterLabel cluster_label_from_string(std::string_view s) {
  if (s == "CONSISTENT") return ClusterLabel::Consistent;
  if (s == "NON_CONSISTENT") return ClusterLabel::NonConsistent;
  throw Error(ErrorCode::ParseError, "unknown cluster label '" + std::string(s) + "'");
}

std::string PreferencePair::pair_id() const {
  return question_id + ":" + std::to_string(chosen_index) + ":" + std::to_string(rejected_index) +
         ":" + strategy;
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

}  // namespace

void validate(const Question& q) {
  require(!q.id.empty(), "question id is empty");
  require(!blank(q.prompt_text), "question '" + q.id + "' has an empty prompt");
}

void validate(const ResponseSample& r) {
  require(r.sample_index >= 0, "negative sample_index");
  require(r.temperature >= 0.0, "negative temperature");
  require(r.char_length == utf8_length(r.text), "char_length does not match text");
}

void validate(const AtomicFact& f) {
  require(!f.fact_id.empty(), "fact_id is empty");
  require(f.position >= 0, "negative fact position");
  require(!blank(f.text), "fact text is empty");
}

void validate(const FactCluster& c) {
  require(!c.member_fact_ids.empty(), "cluster has no members");
}

void validate(const ScoredResponse& s) {
  int sum = 0;
  for (const auto& v : s.verdicts) {
    require(v.delta >= -1 && v.delta <= 1, "verdict delta out of range");
    sum += v.delta;
  }
  require(sum == s.score, "score is not the sum of verdict deltas");
}

void validate(const PreferencePair& p) {
  require(p.chosen_index != p.rejected_index, "chosen and rejected are the same sample");
}

void validate_sample_indices(const std::vector<ResponseSample>& samples) {
  std::vector<bool> seen(samples.size(), false);
  for (const auto& s : samples) {
    require(s.sample_index >= 0 && static_cast<std::size_t>(s.sample_index) < samples.size() &&
                !seen[static_cast<std::size_t>(s.sample_index)],
            "sample indices are not a permutation of 0..m-1");
    seen[static_cast<std::size_t>(s.sample_index)] = true;
  }
}

// -- JSON ------------------------------------------------------------------

void to_json(json& j, const Question& q) {
  j = json{{"id", q.id}, {"prompt", q.prompt_text}, {"system_prompt", q.system_prompt}};
}

void from_json(const json& j, Question& q) {
  j.at("id").get_to(q.id);
  j.at("prompt").get_to(q.prompt_text);
  q.system_prompt = j.value("system_prompt", std::string(kDefaultSystemPrompt));
}

void to_json(json& j, const ResponseSample& r) {
  j = json{{"question_id", r.question_id},
           {"sample_index", r.sample_index},
           {"text", r.text},
           {"temperature", r.temperature},
           {"seed", r.seed}};
}

void from_json(const json& j, ResponseSample& r) {
  r = make_response(j.at("question_id").get<std::string>(), j.at("sample_index").get<int>(),
                    j.at("text").get<std::string>(), j.value("temperature", 0.0),
                    j.value("seed", std::uint64_t{0}));
}

void to_json(json& j, const AtomicFact& f) {
  j = json{{"fact_id", f.fact_id},         {"question_id", f.question_id},
           {"sample_index", f.sample_index}, {"position", f.position},
           {"text", f.text}};
  if (f.excluded) j["excluded"] = true;
}

void from_json(const json& j, AtomicFact& f) {
  j.at("fact_id").get_to(f.fact_id);
  j.at("question_id").get_to(f.question_id);
  j.at("sample_index").get_to(f.sample_index);
  j.at("position").get_to(f.position);
  j.at("text").get_to(f.text);
  f.excluded = j.value("excluded", false);
}

void to_json(json& j, const FactCluster& c) {
  j = json{{"question_id", c.question_id},
           {"cluster_id", c.cluster_id},
           {"label", to_string(c.label)},
           {"member_fact_ids", c.member_fact_ids}};
}

void from_json(const json& j, FactCluster& c) {
  j.at("question_id").get_to(c.question_id);
  j.at("cluster_id").get_to(c.cluster_id);
  c.label = cluster_label_from_string(j.at("label").get<std::string>());
  j.at("member_fact_ids").get_to(c.member_fact_ids);
}

void to_json(json& j, const FactVerdict& v) { j = json{{"fact_id", v.fact_id}, {"delta", v.delta}}; }

void from_json(const json& j, FactVerdict& v) {
  j.at("fact_id").get_to(v.fact_id);
  j.at("delta").get_to(v.delta);
}

void to_json(json& j, const ScoredResponse& s) {
  j = json{{"question_id", s.question_id},
           {"sample_index", s.sample_index},
           {"score", s.score},
           {"verdicts", s.verdicts}};
}

void from_json(const json& j, ScoredResponse& s) {
  j.at("question_id").get_to(s.question_id);
  j.at("sample_index").get_to(s.sample_index);
  j.at("score").get_to(s.score);
  j.at("verdicts").get_to(s.verdicts);
}

void to_json(json& j, const PreferencePair& p) {
  j = json{{"pair_id", p.pair_id()},
           {"prompt", p.prompt},
           {"chosen", p.chosen},
           {"rejected", p.rejected},
           {"question_id", p.question_id},
           {"chosen_score", p.chosen_score},
           {"rejected_score", p.rejected_score},
           {"chosen_index", p.chosen_index},
           {"rejected_index", p.rejected_index},
           {"strategy", p.strategy}};
}

void from_json(const json& j, PreferencePair& p) {
  j.at("prompt").get_to(p.prompt);
  j.at("chosen").get_to(p.chosen);
  j.at("rejected").get_to(p.rejected);
  j.at("question_id").get_to(p.question_id);
  j.at("chosen_score").get_to(p.chosen_score);
  j.at("rejected_score").get_to(p.rejected_score);
  j.at("chosen_index").get_to(p.chosen_index);
  j.at("rejected_index").get_to(p.rejected_index);
  j.at("strategy").get_to(p.strategy);
}

}  // namespace acpo
