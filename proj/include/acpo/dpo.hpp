#pragma once
// DPO objective on a single preference pair, evaluated (not optimized):
//   margin = beta * ((L(pi_w) - L(ref_w)) - (L(pi_l) - L(ref_l)))
//   loss   = -log sigmoid(margin)
// where L sums per-token log-probs (Total) or averages them (Average).

#include <string>
#include <vector>

#include "acpo/types.hpp"

namespace acpo {

enum class LogProbMode { Total, Average };

std::string_view to_string(LogProbMode mode);
LogProbMode log_prob_mode_from_string(std::string_view s);

struct PairLogProbs {
  std::vector<double> chosen_policy;
  std::vector<double> chosen_ref;
  std::vector<double> rejected_policy;
  std::vector<double> rejected_ref;
  double beta = 0.1;
};

// Throws LengthMismatch, NonpositiveBeta, or InvalidArgument (positive
// log-prob, empty sequence).
void validate(const PairLogProbs& p);

struct DpoResult {
  double loss = 0.0;
  double margin = 0.0;
  std::vector<double> grad_chosen;    // d loss / d chosen_policy[t]
  std::vector<double> grad_rejected;  // d loss / d rejected_policy[t]
};

// -log(sigmoid(x)) without overflow for large |x|.
double neg_log_sigmoid(double x);
double sigmoid(double x);

DpoResult dpo_loss(const PairLogProbs& p, LogProbMode mode = LogProbMode::Total);

struct LogProbRecord {
  std::string pair_id;
  PairLogProbs logprobs;
};

void to_json(json& j, const LogProbRecord& r);
void from_json(const json& j, LogProbRecord& r);

struct DpoSummary {
  std::size_t pairs = 0;
  double mean_loss = 0.0;
  double mean_margin = 0.0;
  double fraction_positive_margin = 0.0;
};

void to_json(json& j, const DpoSummary& s);

// Every pair must have a record keyed by PreferencePair::pair_id(); the
// record's beta is replaced by `beta`. Throws MissingLogprobs.
DpoSummary batch_dpo_report(const std::vector<PreferencePair>& pairs, const std::vector<LogProbRecord>& logprobs,
                            LogProbMode mode, double beta = 0.1);

}  // namespace acpo
