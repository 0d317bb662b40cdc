#include "acpo/reporting.hpp"

#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "acpo/error.hpp"

namespace acpo {

void to_json(json& j, const DatasetStats& s) {
  json hist = json::object();
  for (const auto& [score, n] : s.score_histogram) hist[std::to_string(score)] = n;
  json lengths = json::object();
  for (const auto& [strategy, l] : s.length_by_strategy) {
    lengths[strategy] = {{"pairs", l.pairs},
                         {"mean_chosen_length", l.mean_chosen_length},
                         {"mean_rejected_length", l.mean_rejected_length}};
  }
  j = json{{"questions", s.questions},
           {"responses", s.responses},
           {"responses_per_question", s.responses_per_question},
           {"facts", s.facts},
           {"excluded_facts", s.excluded_facts},
           {"clusters", s.clusters},
           {"consistent_clusters", s.consistent_clusters},
           {"avg_clusters_per_question", s.avg_clusters_per_question},
           {"avg_response_coverage", s.avg_response_coverage},
           {"coverage_consistent_only", s.coverage_consistent_only},
           {"score_histogram", hist},
           {"length_by_strategy", lengths},
           {"questions_with_pairs", s.questions_with_pairs}};
}

namespace {

[[noreturn]] void dangling(const std::string& what) { throw Error(ErrorCode::InconsistentRun, what); }

}  // namespace

DatasetStats dataset_stats(const RunRecords& run, bool consistent_only) {
  DatasetStats s;
  s.coverage_consistent_only = consistent_only;

  std::set<std::string> question_ids;
  std::set<std::pair<std::string, int>> response_keys;
  for (const auto& r : run.responses) {
    question_ids.insert(r.question_id);
    response_keys.insert({r.question_id, r.sample_index});
  }
  s.questions = question_ids.size();
  s.responses = run.responses.size();

  std::unordered_map<std::string, const AtomicFact*> facts;
  for (const auto& f : run.facts) {
    if (!response_keys.contains({f.question_id, f.sample_index})) {
      dangling("fact " + f.fact_id + " refers to a missing response");
    }
    facts.emplace(f.fact_id, &f);
    if (f.excluded) ++s.excluded_facts;
  }
  s.facts = run.facts.size();

  // Cluster key is (question, cluster_id); facts map to their cluster.
  std::unordered_map<std::string, std::pair<std::string, int>> cluster_of;
  std::map<std::string, std::size_t> clusters_per_question;
  std::set<std::pair<std::string, int>> cluster_keys;
  for (const auto& c : run.clusters) {
    if (!question_ids.contains(c.question_id)) dangling("cluster of unknown question " + c.question_id);
    if (!cluster_keys.insert({c.question_id, c.cluster_id}).second) {
      dangling("duplicate cluster id " + std::to_string(c.cluster_id) + " in " + c.question_id);
    }
    ++clusters_per_question[c.question_id];
    if (c.label == ClusterLabel::Consistent) ++s.consistent_clusters;
    for (const auto& id : c.member_fact_ids) {
      auto it = facts.find(id);
      if (it == facts.end()) dangling("cluster member " + id + " is not in facts");
      if (it->second->question_id != c.question_id) dangling("fact " + id + " clustered under another question");
      if (it->second->excluded) dangling("excluded fact " + id + " is clustered");
      if (!cluster_of.emplace(id, std::make_pair(c.question_id, c.cluster_id)).second) {
        dangling("fact " + id + " belongs to two clusters");
      }
    }
  }
  s.clusters = run.clusters.size();
  for (const auto& f : run.facts) {
    if (!f.excluded && !cluster_of.contains(f.fact_id)) dangling("fact " + f.fact_id + " has no cluster");
  }

  std::map<std::pair<std::string, int>, ClusterLabel> label_of;
  for (const auto& c : run.clusters) label_of[{c.question_id, c.cluster_id}] = c.label;

  std::map<std::pair<std::string, int>, std::set<int>> coverage;
  for (const auto& f : run.facts) {
    auto it = cluster_of.find(f.fact_id);
    if (it == cluster_of.end()) continue;
    if (consistent_only && label_of.at(it->second) != ClusterLabel::Consistent) continue;
    coverage[{f.question_id, f.sample_index}].insert(it->second.second);
  }

  if (s.questions > 0) {
    double total_clusters = 0.0;
    for (const auto& q : question_ids) total_clusters += static_cast<double>(clusters_per_question[q]);
    s.avg_clusters_per_question = total_clusters / static_cast<double>(s.questions);
    s.responses_per_question = static_cast<double>(s.responses) / static_cast<double>(s.questions);
  }
  if (s.responses > 0) {
    double total_coverage = 0.0;
    for (const auto& key : response_keys) {
      auto it = coverage.find(key);
      if (it != coverage.end()) total_coverage += static_cast<double>(it->second.size());
    }
    s.avg_response_coverage = total_coverage / static_cast<double>(s.responses);
  }

  for (const auto& sc : run.scores) {
    if (!response_keys.contains({sc.question_id, sc.sample_index})) {
      dangling("score for missing response " + sc.question_id + "/" + std::to_string(sc.sample_index));
    }
    ++s.score_histogram[sc.score];
  }

  std::set<std::string> paired_questions;
  for (const auto& p : run.pairs) {
    if (!question_ids.contains(p.question_id)) dangling("pair for unknown question " + p.question_id);
    paired_questions.insert(p.question_id);
    auto& l = s.length_by_strategy[p.strategy];
    ++l.pairs;
    l.mean_chosen_length += static_cast<double>(utf8_length(p.chosen));
    l.mean_rejected_length += static_cast<double>(utf8_length(p.rejected));
  }
  for (auto& [_, l] : s.length_by_strategy) {
    l.mean_chosen_length /= static_cast<double>(l.pairs);
    l.mean_rejected_length /= static_cast<double>(l.pairs);
  }
  s.questions_with_pairs = paired_questions.size();
  return s;
}

std::string render_text(const DatasetStats& s) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  auto row = [&](const std::string& k, const auto& v) { out << std::left << std::setw(34) << k << v << '\n'; };
  row("questions", s.questions);
  row("responses", s.responses);
  row("responses per question", s.responses_per_question);
  row("facts (excluded)", std::to_string(s.facts) + " (" + std::to_string(s.excluded_facts) + ")");
  row("clusters (consistent)", std::to_string(s.clusters) + " (" + std::to_string(s.consistent_clusters) + ")");
  row("ACS  avg clusters per question", s.avg_clusters_per_question);
  row(s.coverage_consistent_only ? "ARC  avg response coverage (C)" : "ARC  avg response coverage", s.avg_response_coverage);
  row("questions with pairs", s.questions_with_pairs);
  out << "\nscore histogram\n";
  for (const auto& [score, n] : s.score_histogram) out << "  " << std::setw(6) << std::right << score << "  " << n << '\n';
  if (!s.length_by_strategy.empty()) {
    out << "\npair lengths (chars)          pairs      P       NP\n";
    for (const auto& [strategy, l] : s.length_by_strategy) {
      out << "  " << std::left << std::setw(28) << strategy << std::right << std::setw(6) << l.pairs << std::setw(9)
          << l.mean_chosen_length << std::setw(9) << l.mean_rejected_length << '\n';
    }
  }
  return out.str();
}

std::string render_csv(const DatasetStats& s) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "metric,key,value\n";
  out << "questions,," << s.questions << '\n';
  out << "responses,," << s.responses << '\n';
  out << "avg_clusters_per_question,," << s.avg_clusters_per_question << '\n';
  out << "avg_response_coverage,," << s.avg_response_coverage << '\n';
  for (const auto& [score, n] : s.score_histogram) out << "score_histogram," << score << ',' << n << '\n';
  for (const auto& [strategy, l] : s.length_by_strategy) {
    out << "mean_chosen_length," << strategy << ',' << l.mean_chosen_length << '\n';
    out << "mean_rejected_length," << strategy << ',' << l.mean_rejected_length << '\n';
  }
  return out.str();
}

}  // namespace acpo
