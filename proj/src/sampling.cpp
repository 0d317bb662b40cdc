#include "acpo/sampling.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "acpo/error.hpp"
#include "acpo/hashing.hpp"
#include "acpo/jsonl.hpp"
#include "acpo/parallel.hpp"

namespace acpo {

void validate(const SamplingConfig& cfg, int min_m) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ConfigInvalid, "sampling: " + what);
  };
  require(cfg.m >= min_m, "m must be >= " + std::to_string(min_m));
  require(cfg.temperature >= 0.0, "temperature must be non-negative");
  require(cfg.top_p > 0.0 && cfg.top_p <= 1.0, "top_p must be in (0, 1]");
  require(cfg.max_tokens > 0, "max_tokens must be positive");
  require(cfg.max_parallel >= 1, "max_parallel must be >= 1");
  require(cfg.retry_limit >= 0, "retry_limit must be >= 0");
}

void to_json(json& j, const SamplingConfig& c) {
  j = json{{"m", c.m},
           {"temperature", c.temperature},
           {"top_p", c.top_p},
           {"max_tokens", c.max_tokens},
           {"endpoint_url", c.endpoint_url},
           {"model_name", c.model_name},
           {"request_timeout_ms", c.request_timeout.count()},
           {"max_parallel", c.max_parallel},
           {"retry_limit", c.retry_limit},
           {"retry_backoff_ms", c.retry_backoff.count()},
           {"run_seed", c.run_seed},
           {"send_seed", c.send_seed},
           {"api_key_env", c.api_key_env}};
}

void from_json(const json& j, SamplingConfig& c) {
  const SamplingConfig d;
  c.m = j.value("m", d.m);
  c.temperature = j.value("temperature", d.temperature);
  c.top_p = j.value("top_p", d.top_p);
  c.max_tokens = j.value("max_tokens", d.max_tokens);
  c.endpoint_url = j.value("endpoint_url", d.endpoint_url);
  c.model_name = j.value("model_name", d.model_name);
  c.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", d.request_timeout.count()));
  c.max_parallel = j.value("max_parallel", d.max_parallel);
  c.retry_limit = j.value("retry_limit", d.retry_limit);
  c.retry_backoff = std::chrono::milliseconds(j.value("retry_backoff_ms", d.retry_backoff.count()));
  c.run_seed = j.value("run_seed", d.run_seed);
  c.send_seed = j.value("send_seed", d.send_seed);
  c.api_key_env = j.value("api_key_env", d.api_key_env);
}

std::uint64_t request_seed(std::uint64_t run_seed, std::string_view question_id, int sample_index) {
  return derive_seed(run_seed, question_id, sample_index) & 0x7FFFFFFFULL;
}

std::string build_chat_request(const Question& q, const SamplingConfig& cfg,
                               std::optional<std::uint64_t> seed) {
  json body{{"model", cfg.model_name},
            {"messages",
             json::array({json{{"role", "system"}, {"content", q.system_prompt}},
                          json{{"role", "user"}, {"content", q.prompt_text}}})},
            {"temperature", cfg.temperature},
            {"top_p", cfg.top_p},
            {"max_tokens", cfg.max_tokens},
            {"n", 1}};
  if (seed) body["seed"] = *seed;
  return body.dump();
}

namespace {

std::string chat_url(const std::string& endpoint) {
  std::string base = endpoint;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + "/chat/completions";
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string complete_once(const Question& q, const SamplingConfig& cfg, Transport& transport,
                          const std::optional<std::string>& api_key, std::uint64_t seed) {
  const std::string url = chat_url(cfg.endpoint_url);
  const std::string body = build_chat_request(q, cfg, cfg.send_seed ? std::optional(seed) : std::nullopt);
  auto backoff = cfg.retry_backoff;
  ErrorCode last_code = ErrorCode::EndpointUnreachable;
  std::string last_reason;

  for (int attempt = 0; attempt <= cfg.retry_limit; ++attempt) {
    if (attempt > 0 && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    const HttpResponse res = transport.post_json(url, body, api_key, cfg.request_timeout);
    if (res.status != 200) {
      last_code = ErrorCode::EndpointUnreachable;
      last_reason = res.status == 0 ? "connection failed: " + res.body
                                    : "HTTP " + std::to_string(res.status);
      continue;
    }
    std::string content;
    try {
      const json parsed = json::parse(res.body);
      const auto& message = parsed.at("choices").at(0).at("message");
      if (message.contains("content") && message["content"].is_string()) {
        content = message["content"].get<std::string>();
      }
    } catch (const json::exception& e) {
      last_code = ErrorCode::EndpointUnreachable;
      last_reason = std::string("malformed completion body: ") + e.what();
      continue;
    }
    if (is_blank(content)) {
      last_code = ErrorCode::EmptyCompletion;
      last_reason = "endpoint returned an empty completion";
      continue;
    }
    return content;
  }
  throw Error(last_code, "question '" + q.id + "' after " + std::to_string(cfg.retry_limit + 1) +
                             " attempts: " + last_reason);
}

std::filesystem::path fixture_path(const std::filesystem::path& dir, std::string_view question_id) {
  const bool safe = !question_id.empty() &&
                    std::all_of(question_id.begin(), question_id.end(), [](unsigned char c) {
                      return std::isalnum(c) || c == '-' || c == '_' || c == '.';
                    }) &&
                    question_id.front() != '.';
  const std::string stem = safe ? std::string(question_id) : "q_" + hex64(fnv1a64(question_id));
  return dir / (stem + ".jsonl");
}

std::filesystem::path record_fixture(const Question& q, const std::vector<ResponseSample>& samples,
                                     const std::filesystem::path& dir) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no samples to record");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoWriteFailed, "create " + dir.string() + ": " + ec.message());
  auto sorted = samples;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.sample_index < b.sample_index; });
  const auto path = fixture_path(dir, q.id);
  write_jsonl(path, sorted);
  return path;
}

std::vector<ResponseSample> replay_fixture(const Question& q, int m,
                                           const std::filesystem::path& dir) {
  const auto path = fixture_path(dir, q.id);
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::FixtureMiss, "no recording for question '" + q.id + "' at " + path.string());
  }
  std::map<int, ResponseSample> by_index;
  for (auto& r : read_jsonl<ResponseSample>(path)) {
    if (r.question_id != q.id) continue;
    by_index[r.sample_index] = std::move(r);
  }
  std::vector<ResponseSample> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    auto it = by_index.find(i);
    if (it == by_index.end()) {
      throw Error(ErrorCode::FixtureMiss, "question '" + q.id + "' has no recording for sample " +
                                              std::to_string(i));
    }
    out.push_back(it->second);
  }
  return out;
}

namespace {

std::shared_ptr<Transport> transport_for(const SamplingBackend& backend) {
  return backend.transport ? backend.transport : make_http_transport();
}

struct Slot {
  std::optional<ResponseSample> sample;
  std::string error;
};

}  // namespace

std::vector<ResponseSample> sample_responses(const Question& q, const SamplingConfig& cfg,
                                             const SamplingBackend& backend) {
  validate(q);
  if (backend.mode == SamplingMode::Replay) return replay_fixture(q, cfg.m, backend.fixture_dir);

  auto transport = transport_for(backend);
  std::vector<ResponseSample> out(static_cast<std::size_t>(cfg.m));
  parallel_for(out.size(), static_cast<std::size_t>(cfg.max_parallel), [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    const auto seed = request_seed(cfg.run_seed, q.id, idx);
    out[i] = make_response(q.id, idx, complete_once(q, cfg, *transport, backend.api_key, seed),
                           cfg.temperature, seed);
  });
  if (backend.mode == SamplingMode::Record) record_fixture(q, out, backend.fixture_dir);
  return out;
}

SampleBatch sample_batch(const std::vector<Question>& questions, const SamplingConfig& cfg,
                         const SamplingBackend& backend) {
  SampleBatch batch;
  const auto m = static_cast<std::size_t>(cfg.m);

  if (backend.mode == SamplingMode::Replay) {
    for (const auto& q : questions) {
      try {
        auto samples = replay_fixture(q, cfg.m, backend.fixture_dir);
        batch.responses.insert(batch.responses.end(), samples.begin(), samples.end());
      } catch (const Error& e) {
        spdlog::warn("skipping question '{}': {}", q.id, e.what());
        batch.failures.push_back({q.id, e.what()});
      }
    }
    return batch;
  }

  auto transport = transport_for(backend);
  std::vector<Slot> slots(questions.size() * m);
  parallel_for(slots.size(), static_cast<std::size_t>(cfg.max_parallel), [&](std::size_t t) {
    const auto& q = questions[t / m];
    const int idx = static_cast<int>(t % m);
    try {
      const auto seed = request_seed(cfg.run_seed, q.id, idx);
      slots[t].sample = make_response(q.id, idx, complete_once(q, cfg, *transport, backend.api_key, seed),
                                      cfg.temperature, seed);
    } catch (const Error& e) {
      slots[t].error = e.what();
    }
  });

  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    const auto first = slots.begin() + static_cast<std::ptrdiff_t>(qi * m);
    const auto last = first + static_cast<std::ptrdiff_t>(m);
    auto failed = std::find_if(first, last, [](const Slot& s) { return !s.sample; });
    if (failed != last) {
      spdlog::warn("skipping question '{}': {}", questions[qi].id, failed->error);
      batch.failures.push_back({questions[qi].id, failed->error});
      continue;
    }
    std::vector<ResponseSample> samples;
    for (auto it = first; it != last; ++it) samples.push_back(*it->sample);
    if (backend.mode == SamplingMode::Record) record_fixture(questions[qi], samples, backend.fixture_dir);
    batch.responses.insert(batch.responses.end(), samples.begin(), samples.end());
  }
  return batch;
}

}  // namespace acpo
