#pragma once
// Draw m stochastic answers per question from an OpenAI-compatible
// chat-completions endpoint, or replay previously recorded answers.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acpo/http.hpp"
#include "acpo/types.hpp"

namespace acpo {

struct SamplingConfig {
  int m = 30;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_tokens = 1024;
  std::string endpoint_url = "http://127.0.0.1:8000/v1";
  std::string model_name = "default";
  std::chrono::milliseconds request_timeout{60'000};
  int max_parallel = 4;
  int retry_limit = 2;
  std::chrono::milliseconds retry_backoff{500};  // doubled after every failed attempt
  std::uint64_t run_seed = 0;
  bool send_seed = true;
  std::string api_key_env = "OPENAI_API_KEY";

  bool operator==(const SamplingConfig&) const = default;
};

// `min_m` is 2 for curation (a pair needs two candidates); ASC accepts 1.
void validate(const SamplingConfig& cfg, int min_m = 2);

void to_json(json& j, const SamplingConfig& c);
void from_json(const json& j, SamplingConfig& c);

enum class SamplingMode { Live, Replay, Record };

struct SamplingBackend {
  SamplingMode mode = SamplingMode::Live;
  std::filesystem::path fixture_dir;     // replay source or record target
  std::shared_ptr<Transport> transport;  // live/record only; defaults to HTTP
  std::optional<std::string> api_key;
};

// The seed actually sent with request (question, sample_index). Masked to
// 31 bits since many servers reject larger integers.
std::uint64_t request_seed(std::uint64_t run_seed, std::string_view question_id, int sample_index);

std::string build_chat_request(const Question& q, const SamplingConfig& cfg,
                               std::optional<std::uint64_t> seed);

// Issues one completion request with retries. Throws EndpointUnreachable or
// EmptyCompletion once retry_limit retries are exhausted.
std::string complete_once(const Question& q, const SamplingConfig& cfg, Transport& transport,
                          const std::optional<std::string>& api_key, std::uint64_t seed);

// Returns exactly cfg.m samples with sample_index 0..m-1.
std::vector<ResponseSample> sample_responses(const Question& q, const SamplingConfig& cfg,
                                             const SamplingBackend& backend);

struct SamplingFailure {
  std::string question_id;
  std::string reason;
};

struct SampleBatch {
  std::vector<ResponseSample> responses;  // question input order, then sample_index
  std::vector<SamplingFailure> failures;
};

// Samples many questions with up to cfg.max_parallel requests in flight.
// A question whose requests fail is dropped and reported, not fatal.
SampleBatch sample_batch(const std::vector<Question>& questions, const SamplingConfig& cfg,
                         const SamplingBackend& backend);

std::filesystem::path fixture_path(const std::filesystem::path& dir, std::string_view question_id);

std::filesystem::path record_fixture(const Question& q, const std::vector<ResponseSample>& samples,
                                     const std::filesystem::path& dir);

// Loads the first m recorded samples; FixtureMiss when absent or short.
std::vector<ResponseSample> replay_fixture(const Question& q, int m,
                                           const std::filesystem::path& dir);

}  // namespace acpo
