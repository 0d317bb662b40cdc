#pragma once
// Platform-stable hashing and random streams. std::hash and the standard
// distributions are implementation-defined, so anything that must reproduce
// byte-for-byte across toolchains goes through these instead.

#include <cstdint>
#include <string>
#include <string_view>

namespace acpo {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);
std::string hex64(std::uint64_t v);

// Per-request sampling seed: hash(run_seed, question_id, sample_index).
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view question_id, int sample_index);

// Counter-based generator: the i-th draw is a pure function of (key, i).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in (0, 1]; safe as a log argument.
  double uniform_open0() { return 1.0 - uniform(); }
  double normal();
  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace acpo
