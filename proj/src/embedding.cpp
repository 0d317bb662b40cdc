#include "acpo/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>

#include "acpo/error.hpp"
#include "acpo/hashing.hpp"
#include "acpo/jsonl.hpp"
#include "acpo/parallel.hpp"

namespace acpo {

void to_json(json& j, const EmbeddingBackend& b) {
  if (const auto* off = std::get_if<OfflineHashBackend>(&b)) {
    j = json{{"kind", "offline_hash"}, {"dim", off->dim}, {"seed", off->seed}};
    return;
  }
  const auto& r = std::get<RemoteBackend>(b);
  j = json{{"kind", "remote"},
           {"url", r.url},
           {"model", r.model},
           {"batch_size", r.batch_size},
           {"max_parallel", r.max_parallel},
           {"retry_limit", r.retry_limit},
           {"request_timeout_ms", r.request_timeout.count()},
           {"api_key_env", r.api_key_env}};
}

void from_json(const json& j, EmbeddingBackend& b) {
  const auto kind = j.value("kind", std::string("offline_hash"));
  if (kind == "offline_hash") {
    OfflineHashBackend off;
    off.dim = j.value("dim", off.dim);
    off.seed = j.value("seed", off.seed);
    b = off;
  } else if (kind == "remote") {
    RemoteBackend r;
    r.url = j.value("url", r.url);
    r.model = j.value("model", r.model);
    r.batch_size = j.value("batch_size", r.batch_size);
    r.max_parallel = j.value("max_parallel", r.max_parallel);
    r.retry_limit = j.value("retry_limit", r.retry_limit);
    r.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", r.request_timeout.count()));
    r.api_key_env = j.value("api_key_env", r.api_key_env);
    b = r;
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown embedding backend '" + kind + "'");
  }
}

std::string backend_id(const EmbeddingBackend& b) {
  if (const auto* off = std::get_if<OfflineHashBackend>(&b)) {
    return "offline_hash:dim=" + std::to_string(off->dim) + ":seed=" + std::to_string(off->seed);
  }
  const auto& r = std::get<RemoteBackend>(b);
  return "remote:" + r.url + ":" + r.model;
}

std::string normalize_for_embedding(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(u));
  }
  while (!out.empty() && (std::ispunct(static_cast<unsigned char>(out.back())) ||
                          std::isspace(static_cast<unsigned char>(out.back())))) {
    out.pop_back();
  }
  return out;
}

std::vector<float> l2_normalize(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero or non-finite vector");
  }
  std::vector<float> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [norm](double x) { return static_cast<float>(x / norm); });
  return out;
}

std::vector<float> offline_hash_embedding(std::string_view normalized_text, int dim, std::uint64_t seed) {
  if (dim <= 0) throw Error(ErrorCode::InvalidArgument, "embedding dim must be positive");
  CounterRng rng(hash_combine(fnv1a64(normalized_text), seed));
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = rng.normal();
  return l2_normalize(v);
}

// -- cache -----------------------------------------------------------------

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    for (const auto& rec : read_jsonl_values(path_)) {
      entries_[rec.at("key").get<std::string>()] = rec.at("vector").get<std::vector<float>>();
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorCode::IoWriteFailed, "cannot open cache " + path_.string());
}

std::optional<std::vector<float>> EmbeddingCache::find(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::insert(const std::string& key, const std::vector<float>& vector) {
  std::unique_lock lock(mu_);
  if (!entries_.emplace(key, vector).second) return;
  out_ << json{{"key", key}, {"vector", vector}}.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::IoWriteFailed, "cache append failed: " + path_.string());
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::string EmbeddingCache::make_key(const std::string& backend, const std::string& normalized_text) {
  return backend + "|" + normalized_text;
}

// -- embedder --------------------------------------------------------------

Embedder::Embedder(EmbeddingBackend backend, std::shared_ptr<Transport> transport,
                   std::shared_ptr<EmbeddingCache> cache, std::optional<std::string> api_key)
    : backend_(std::move(backend)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      api_key_(std::move(api_key)) {
  if (std::holds_alternative<RemoteBackend>(backend_) && !transport_) transport_ = make_http_transport();
}

std::vector<std::vector<float>> Embedder::remote_batch(const RemoteBackend& remote,
                                                       const std::vector<std::string>& texts) const {
  std::string url = remote.url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/embeddings";
  const std::string body = json{{"model", remote.model}, {"input", texts}}.dump();

  std::string last_reason;
  for (int attempt = 0; attempt <= remote.retry_limit; ++attempt) {
    const auto res = transport_->post_json(url, body, api_key_, remote.request_timeout);
    if (res.status != 200) {
      last_reason = res.status == 0 ? "connection failed: " + res.body : "HTTP " + std::to_string(res.status);
      continue;
    }
    json data;
    try {
      data = json::parse(res.body).at("data");
    } catch (const json::exception& e) {
      last_reason = std::string("malformed embeddings body: ") + e.what();
      continue;
    }
    if (data.size() != texts.size()) {
      throw Error(ErrorCode::DimMismatch, "endpoint returned " + std::to_string(data.size()) +
                                              " embeddings for " + std::to_string(texts.size()) + " inputs");
    }
    std::vector<std::vector<float>> out(texts.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
      if (slot >= out.size()) throw Error(ErrorCode::ParseError, "embedding index out of range");
      try {
        out[slot] = l2_normalize(data[i].at("embedding").get<std::vector<double>>());
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("bad embedding entry: ") + e.what());
      }
    }
    return out;
  }
  throw Error(ErrorCode::EndpointUnreachable,
              "embeddings after " + std::to_string(remote.retry_limit + 1) + " attempts: " + last_reason);
}

std::vector<std::vector<float>> Embedder::embed_texts(const std::vector<std::string>& texts) const {
  const std::string bid = id();

  // Deduplicate: repeated facts across samples are the common case.
  std::vector<std::string> normalized(texts.size());
  std::map<std::string, std::vector<float>> resolved;
  std::transform(texts.begin(), texts.end(), normalized.begin(), normalize_for_embedding);
  std::vector<std::string> missing;
  for (const auto& n : normalized) {
    if (resolved.contains(n)) continue;
    std::optional<std::vector<float>> hit;
    if (cache_) hit = cache_->find(EmbeddingCache::make_key(bid, n));
    if (hit) {
      resolved.emplace(n, std::move(*hit));
    } else {
      resolved.emplace(n, std::vector<float>{});
      missing.push_back(n);
    }
  }

  if (const auto* off = std::get_if<OfflineHashBackend>(&backend_)) {
    for (const auto& n : missing) resolved[n] = offline_hash_embedding(n, off->dim, off->seed);
  } else {
    const auto& remote = std::get<RemoteBackend>(backend_);
    const auto batch = static_cast<std::size_t>(std::max(1, remote.batch_size));
    const std::size_t batches = (missing.size() + batch - 1) / batch;
    std::vector<std::vector<std::vector<float>>> results(batches);
    parallel_for(batches, static_cast<std::size_t>(remote.max_parallel), [&](std::size_t b) {
      const auto first = missing.begin() + static_cast<std::ptrdiff_t>(b * batch);
      const auto last = missing.begin() + static_cast<std::ptrdiff_t>(std::min(missing.size(), (b + 1) * batch));
      results[b] = remote_batch(remote, std::vector<std::string>(first, last));
    });
    for (std::size_t b = 0; b < batches; ++b) {
      for (std::size_t k = 0; k < results[b].size(); ++k) resolved[missing[b * batch + k]] = std::move(results[b][k]);
    }
  }

  if (cache_) {
    for (const auto& n : missing) cache_->insert(EmbeddingCache::make_key(bid, n), resolved[n]);
  }

  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  std::size_t dim = 0;
  for (const auto& n : normalized) {
    const auto& v = resolved.at(n);
    if (dim == 0) dim = v.size();
    if (v.size() != dim || dim == 0) {
      throw Error(ErrorCode::DimMismatch, "backend " + bid + " returned dims " + std::to_string(dim) +
                                              " and " + std::to_string(v.size()));
    }
    out.push_back(v);
  }
  return out;
}

std::vector<FactEmbedding> Embedder::embed_facts(const std::vector<AtomicFact>& facts) const {
  std::vector<std::string> texts;
  texts.reserve(facts.size());
  for (const auto& f : facts) {
    if (f.excluded) throw Error(ErrorCode::InvalidArgument, "excluded fact " + f.fact_id + " passed to embedder");
    texts.push_back(f.text);
  }
  auto vectors = embed_texts(texts);
  std::vector<FactEmbedding> out(facts.size());
  for (std::size_t i = 0; i < facts.size(); ++i) out[i] = {facts[i].fact_id, std::move(vectors[i])};
  return out;
}

// -- embeddings.bin --------------------------------------------------------

namespace {

template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf += static_cast<char>((value >> (8 * i)) & 0xFF);
}

template <typename T>
T get_le(const std::string& buf, std::size_t& at) {
  if (at + sizeof(T) > buf.size()) throw Error(ErrorCode::ParseError, "embeddings file truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  at += sizeof(T);
  return v;
}

}  // namespace

void write_embeddings(const std::filesystem::path& bin_path, const std::filesystem::path& ids_path,
                      const std::vector<FactEmbedding>& embeddings) {
  const std::uint32_t dim = embeddings.empty() ? 0 : static_cast<std::uint32_t>(embeddings.front().dim());
  std::string bin;
  std::string ids;
  put_le<std::uint32_t>(bin, dim);
  put_le<std::uint64_t>(bin, embeddings.size());
  for (const auto& e : embeddings) {
    if (e.dim() != dim) throw Error(ErrorCode::DimMismatch, "mixed dims while writing " + bin_path.string());
    for (float x : e.vector) put_le<std::uint32_t>(bin, std::bit_cast<std::uint32_t>(x));
    ids += e.fact_id;
    ids += '\n';
  }
  write_file_atomic(ids_path, ids);
  write_file_atomic(bin_path, bin);
}

std::vector<FactEmbedding> read_embeddings(const std::filesystem::path& bin_path,
                                           const std::filesystem::path& ids_path) {
  const std::string bin = read_file(bin_path);
  const std::string ids = read_file(ids_path);
  std::size_t at = 0;
  const auto dim = get_le<std::uint32_t>(bin, at);
  const auto count = get_le<std::uint64_t>(bin, at);
  std::vector<FactEmbedding> out;
  out.reserve(count);
  std::size_t line_start = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto nl = ids.find('\n', line_start);
    if (nl == std::string::npos) throw Error(ErrorCode::ParseError, "embedding id sidecar is short");
    FactEmbedding e{ids.substr(line_start, nl - line_start), std::vector<float>(dim)};
    line_start = nl + 1;
    for (auto& x : e.vector) x = std::bit_cast<float>(get_le<std::uint32_t>(bin, at));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace acpo
