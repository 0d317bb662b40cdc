#pragma once
// Average-linkage agglomerative clustering under cosine distance,
// merging while the closest pair of clusters is within the threshold.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "acpo/types.hpp"

namespace acpo {

struct ClusteringConfig {
  double distance_threshold = 0.15;
  bool operator==(const ClusteringConfig&) const = default;
};

void validate(const ClusteringConfig& cfg);
void to_json(json& j, const ClusteringConfig& c);
void from_json(const json& j, ClusteringConfig& c);

// 1 - <u, v> for unit vectors, clamped to [0, 2]. Throws DimMismatch.
double cosine_distance(std::span<const double> u, std::span<const double> v);
double cosine_distance(std::span<const float> u, std::span<const float> v);

// One accepted merge. Clusters are named by their smallest input index.
struct MergeStep {
  int step = 0;
  std::size_t first = 0;
  std::size_t second = 0;
  double distance = 0.0;
};

struct Partition {
  // Each cluster's members ascending; clusters ordered by smallest member.
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<MergeStep> trace;
};

// Vectors are re-normalized internally, so any positive scaling of an input
// leaves the result unchanged. Ties on the minimal linkage go to the pair
// whose smaller cluster name is least, then the larger one.
// Throws EmptyInput, DimMismatch, or InvalidArgument (zero vector).
Partition agglomerate(std::span<const std::vector<float>> vectors, const ClusteringConfig& cfg);
Partition agglomerate(std::span<const std::vector<double>> vectors, const ClusteringConfig& cfg);

struct FactPartition {
  std::vector<std::vector<std::string>> clusters;  // fact ids
  std::vector<MergeStep> trace;
};

FactPartition cluster_embeddings(const std::vector<FactEmbedding>& embeddings, const ClusteringConfig& cfg);

}  // namespace acpo
