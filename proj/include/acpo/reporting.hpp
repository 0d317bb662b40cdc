#pragma once
// Run statistics over the stage files of one run directory.

#include <map>
#include <string>
#include <vector>

#include "acpo/types.hpp"

namespace acpo {

struct RunRecords {
  std::vector<ResponseSample> responses;
  std::vector<AtomicFact> facts;
  std::vector<FactCluster> clusters;
  std::vector<ScoredResponse> scores;
  std::vector<PreferencePair> pairs;
};

struct LengthStats {
  std::size_t pairs = 0;
  double mean_chosen_length = 0.0;    // code points
  double mean_rejected_length = 0.0;
};

struct DatasetStats {
  std::size_t questions = 0;
  std::size_t responses = 0;
  double responses_per_question = 0.0;
  std::size_t facts = 0;
  std::size_t excluded_facts = 0;
  std::size_t clusters = 0;
  std::size_t consistent_clusters = 0;
  // Mean number of clusters per question (displayed as "ACS").
  double avg_clusters_per_question = 0.0;
  // Mean number of distinct clusters a response has facts in ("ARC").
  double avg_response_coverage = 0.0;
  bool coverage_consistent_only = false;
  std::map<int, std::size_t> score_histogram;
  std::map<std::string, LengthStats> length_by_strategy;
  std::size_t questions_with_pairs = 0;
};

void to_json(json& j, const DatasetStats& s);

// Throws InconsistentRun naming the first dangling reference found.
DatasetStats dataset_stats(const RunRecords& run, bool consistent_only = false);

std::string render_text(const DatasetStats& s);
std::string render_csv(const DatasetStats& s);

}  // namespace acpo
