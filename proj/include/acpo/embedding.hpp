#pragma once
// Maps fact texts to unit vectors through a remote /embeddings endpoint or a
// deterministic offline hash embedder.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "acpo/http.hpp"
#include "acpo/types.hpp"

namespace acpo {

struct OfflineHashBackend {
  int dim = 256;
  std::uint64_t seed = 0;
  bool operator==(const OfflineHashBackend&) const = default;
};

struct RemoteBackend {
  std::string url = "http://127.0.0.1:8000/v1";
  std::string model = "default";
  int batch_size = 64;
  int max_parallel = 4;
  int retry_limit = 2;
  std::chrono::milliseconds request_timeout{60'000};
  std::string api_key_env = "OPENAI_API_KEY";
  bool operator==(const RemoteBackend&) const = default;
};

using EmbeddingBackend = std::variant<OfflineHashBackend, RemoteBackend>;

void to_json(json& j, const EmbeddingBackend& b);
void from_json(const json& j, EmbeddingBackend& b);

std::string backend_id(const EmbeddingBackend& b);

// Lowercase, collapse whitespace, strip trailing punctuation. Both backends
// embed this form, so equal facts land at distance 0.
std::string normalize_for_embedding(std::string_view text);

// Pure function of (normalized text, dim, seed): a counter-based stream
// seeded from the text hash, dim standard normals, L2-normalized.
std::vector<float> offline_hash_embedding(std::string_view normalized_text, int dim, std::uint64_t seed);

// Throws InvalidArgument for a zero vector.
std::vector<float> l2_normalize(const std::vector<double>& v);

// Append-only JSONL cache of {"key", "vector"}; concurrent readers, one writer.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path);

  std::optional<std::vector<float>> find(const std::string& key) const;
  void insert(const std::string& key, const std::vector<float>& vector);
  std::size_t size() const;

  static std::string make_key(const std::string& backend, const std::string& normalized_text);

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::vector<float>> entries_;
  std::ofstream out_;
};

class Embedder {
 public:
  explicit Embedder(EmbeddingBackend backend, std::shared_ptr<Transport> transport = nullptr,
                    std::shared_ptr<EmbeddingCache> cache = nullptr,
                    std::optional<std::string> api_key = std::nullopt);

  const EmbeddingBackend& backend() const { return backend_; }
  std::string id() const { return backend_id(backend_); }

  // Embeds raw texts (normalized internally); output is unit-norm and
  // index-aligned with the input.
  std::vector<std::vector<float>> embed_texts(const std::vector<std::string>& texts) const;

  // One embedding per fact. Excluded facts are rejected.
  std::vector<FactEmbedding> embed_facts(const std::vector<AtomicFact>& facts) const;

 private:
  std::vector<std::vector<float>> remote_batch(const RemoteBackend& remote,
                                               const std::vector<std::string>& texts) const;

  EmbeddingBackend backend_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::optional<std::string> api_key_;
};

// embeddings.bin: u32 dim, u64 count, count*dim little-endian f32. The fact
// ids live in a sidecar text file, one per line, in the same order.
void write_embeddings(const std::filesystem::path& bin_path, const std::filesystem::path& ids_path,
                      const std::vector<FactEmbedding>& embeddings);
std::vector<FactEmbedding> read_embeddings(const std::filesystem::path& bin_path,
                                           const std::filesystem::path& ids_path);

}  // namespace acpo
