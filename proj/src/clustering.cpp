#include "acpo/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acpo/error.hpp"

namespace acpo {

void validate(const ClusteringConfig& cfg) {
  if (!(cfg.distance_threshold > 0.0 && cfg.distance_threshold <= 2.0)) {
    throw Error(ErrorCode::ConfigInvalid, "clustering: distance_threshold must be in (0, 2]");
  }
}

void to_json(json& j, const ClusteringConfig& c) {
  j = json{{"distance_threshold", c.distance_threshold}, {"linkage", "average"}};
}

void from_json(const json& j, ClusteringConfig& c) {
  c.distance_threshold = j.value("distance_threshold", ClusteringConfig{}.distance_threshold);
  if (j.value("linkage", std::string("average")) != "average") {
    throw Error(ErrorCode::ConfigInvalid, "clustering: only average linkage is supported");
  }
}

namespace {

template <typename T>
double dot_distance(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::DimMismatch,
                "cosine distance of dims " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) dot += static_cast<double>(u[k]) * static_cast<double>(v[k]);
  return std::clamp(1.0 - dot, 0.0, 2.0);
}

template <typename T>
std::vector<std::vector<double>> unit_rows(std::span<const std::vector<T>> vectors) {
  if (vectors.empty()) throw Error(ErrorCode::EmptyInput, "nothing to cluster");
  const std::size_t dim = vectors.front().size();
  std::vector<std::vector<double>> rows;
  rows.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::DimMismatch, "clustering input mixes dims " + std::to_string(dim) + " and " +
                                              std::to_string(v.size()));
    }
    double sq = 0.0;
    for (T x : v) sq += static_cast<double>(x) * static_cast<double>(x);
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorCode::InvalidArgument, "cannot cluster a zero or non-finite vector");
    }
    std::vector<double> row(dim);
    for (std::size_t k = 0; k < dim; ++k) row[k] = static_cast<double>(v[k]) / norm;
    rows.push_back(std::move(row));
  }
  return rows;
}

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Dense linkage matrix with a cached nearest neighbour per row. Row i only
// tracks partners j > i, so the row-wise minimum with the smallest i already
// encodes the tie-break order.
class AverageLinkage {
 public:
  explicit AverageLinkage(const std::vector<std::vector<double>>& rows)
      : n_(rows.size()), dist_(n_ * n_, 0.0), size_(n_, 1), active_(n_, true), nn_(n_, kNone),
        nn_dist_(n_, kInf), members_(n_) {
    for (std::size_t i = 0; i < n_; ++i) members_[i] = {i};
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double d = dot_distance<double>(rows[i], rows[j]);
        at(i, j) = d;
        at(j, i) = d;
      }
    }
    for (std::size_t i = 0; i < n_; ++i) refresh(i);
  }

  Partition run(double threshold) {
    Partition out;
    int step = 0;
    while (true) {
      std::size_t best = kNone;
      for (std::size_t i = 0; i < n_; ++i) {
        if (active_[i] && nn_[i] != kNone && (best == kNone || nn_dist_[i] < nn_dist_[best])) best = i;
      }
      if (best == kNone || nn_dist_[best] > threshold) break;
      const std::size_t a = best;
      const std::size_t b = nn_[best];
      out.trace.push_back({step++, a, b, nn_dist_[best]});
      merge(a, b);
    }

    for (std::size_t i = 0; i < n_; ++i) {
      if (!active_[i]) continue;
      std::sort(members_[i].begin(), members_[i].end());
      out.clusters.push_back(std::move(members_[i]));
    }
    return out;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  double& at(std::size_t i, std::size_t j) { return dist_[i * n_ + j]; }

  void refresh(std::size_t i) {
    nn_[i] = kNone;
    nn_dist_[i] = kInf;
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (active_[j] && (nn_[i] == kNone || at(i, j) < nn_dist_[i])) {
        nn_[i] = j;
        nn_dist_[i] = at(i, j);
      }
    }
  }

  // Folds b into a (a < b) with the size-weighted average-linkage update.
  void merge(std::size_t a, std::size_t b) {
    const double wa = static_cast<double>(size_[a]);
    const double wb = static_cast<double>(size_[b]);
    for (std::size_t k = 0; k < n_; ++k) {
      if (!active_[k] || k == a || k == b) continue;
      const double d = (wa * at(a, k) + wb * at(b, k)) / (wa + wb);
      at(a, k) = d;
      at(k, a) = d;
    }
    size_[a] += size_[b];
    active_[b] = false;
    members_[a].insert(members_[a].end(), members_[b].begin(), members_[b].end());
    members_[b].clear();

    refresh(a);
    for (std::size_t k = 0; k < b; ++k) {
      if (!active_[k] || k == a) continue;
      if (nn_[k] == a || nn_[k] == b) {
        refresh(k);
      } else if (k < a) {
        const double d = at(k, a);
        if (d < nn_dist_[k] || (d == nn_dist_[k] && a < nn_[k])) {
          nn_[k] = a;
          nn_dist_[k] = d;
        }
      }
    }
  }

  std::size_t n_;
  std::vector<double> dist_;
  std::vector<std::size_t> size_;
  std::vector<bool> active_;
  std::vector<std::size_t> nn_;
  std::vector<double> nn_dist_;
  std::vector<std::vector<std::size_t>> members_;
};

template <typename T>
Partition agglomerate_impl(std::span<const std::vector<T>> vectors, const ClusteringConfig& cfg) {
  validate(cfg);
  AverageLinkage linkage(unit_rows(vectors));
  return linkage.run(cfg.distance_threshold);
}

}  // namespace

double cosine_distance(std::span<const double> u, std::span<const double> v) { return dot_distance(u, v); }
double cosine_distance(std::span<const float> u, std::span<const float> v) { return dot_distance(u, v); }

Partition agglomerate(std::span<const std::vector<float>> vectors, const ClusteringConfig& cfg) {
  return agglomerate_impl(vectors, cfg);
}

Partition agglomerate(std::span<const std::vector<double>> vectors, const ClusteringConfig& cfg) {
  return agglomerate_impl(vectors, cfg);
}

FactPartition cluster_embeddings(const std::vector<FactEmbedding>& embeddings, const ClusteringConfig& cfg) {
  std::vector<std::vector<float>> vectors;
  vectors.reserve(embeddings.size());
  for (const auto& e : embeddings) vectors.push_back(e.vector);
  auto part = agglomerate(std::span<const std::vector<float>>(vectors), cfg);
  FactPartition out;
  out.trace = std::move(part.trace);
  for (const auto& c : part.clusters) {
    std::vector<std::string> ids;
    ids.reserve(c.size());
    for (auto idx : c) ids.push_back(embeddings[idx].fact_id);
    out.clusters.push_back(std::move(ids));
  }
  return out;
}

}  // namespace acpo
