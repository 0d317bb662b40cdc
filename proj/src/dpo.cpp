#include "acpo/dpo.hpp"

#include <cmath>
#include <unordered_map>

#include "acpo/error.hpp"

namespace acpo {

std::string_view to_string(LogProbMode mode) { return mode == LogProbMode::Total ? "total" : "average"; }

LogProbMode log_prob_mode_from_string(std::string_view s) {
  if (s == "total") return LogProbMode::Total;
  if (s == "average") return LogProbMode::Average;
  throw Error(ErrorCode::InvalidArgument, "log-prob mode must be 'total' or 'average'");
}

void validate(const PairLogProbs& p) {
  if (!(p.beta > 0.0)) throw Error(ErrorCode::NonpositiveBeta, "beta must be positive");
  if (p.chosen_policy.size() != p.chosen_ref.size()) {
    throw Error(ErrorCode::LengthMismatch, "chosen policy/reference lengths differ");
  }
  if (p.rejected_policy.size() != p.rejected_ref.size()) {
    throw Error(ErrorCode::LengthMismatch, "rejected policy/reference lengths differ");
  }
  if (p.chosen_policy.empty() || p.rejected_policy.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty token sequence");
  }
  for (const auto* seq : {&p.chosen_policy, &p.chosen_ref, &p.rejected_policy, &p.rejected_ref}) {
    for (double x : *seq) {
      if (!(x <= 0.0)) throw Error(ErrorCode::InvalidArgument, "log-probs must be <= 0");
    }
  }
}

double neg_log_sigmoid(double x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

double reduce(const std::vector<double>& seq, LogProbMode mode) {
  double sum = 0.0;
  for (double x : seq) sum += x;
  return mode == LogProbMode::Total ? sum : sum / static_cast<double>(seq.size());
}

}  // namespace

DpoResult dpo_loss(const PairLogProbs& p, LogProbMode mode) {
  validate(p);
  const double chosen_ratio = reduce(p.chosen_policy, mode) - reduce(p.chosen_ref, mode);
  const double rejected_ratio = reduce(p.rejected_policy, mode) - reduce(p.rejected_ref, mode);

  DpoResult out;
  out.margin = p.beta * (chosen_ratio - rejected_ratio);
  out.loss = neg_log_sigmoid(out.margin);

  // d(-log sigmoid(m))/dm = -sigmoid(-m); chain through dm/dtoken = +-beta*w.
  const double slope = p.beta * sigmoid(-out.margin);
  const double w_chosen = mode == LogProbMode::Total ? 1.0 : 1.0 / static_cast<double>(p.chosen_policy.size());
  const double w_rejected =
      mode == LogProbMode::Total ? 1.0 : 1.0 / static_cast<double>(p.rejected_policy.size());
  out.grad_chosen.assign(p.chosen_policy.size(), -slope * w_chosen);
  out.grad_rejected.assign(p.rejected_policy.size(), slope * w_rejected);
  return out;
}

void to_json(json& j, const LogProbRecord& r) {
  j = json{{"pair_id", r.pair_id},
           {"chosen_policy", r.logprobs.chosen_policy},
           {"chosen_ref", r.logprobs.chosen_ref},
           {"rejected_policy", r.logprobs.rejected_policy},
           {"rejected_ref", r.logprobs.rejected_ref}};
}

void from_json(const json& j, LogProbRecord& r) {
  j.at("pair_id").get_to(r.pair_id);
  j.at("chosen_policy").get_to(r.logprobs.chosen_policy);
  j.at("chosen_ref").get_to(r.logprobs.chosen_ref);
  j.at("rejected_policy").get_to(r.logprobs.rejected_policy);
  j.at("rejected_ref").get_to(r.logprobs.rejected_ref);
}

void to_json(json& j, const DpoSummary& s) {
  j = json{{"pairs", s.pairs},
           {"mean_loss", s.mean_loss},
           {"mean_margin", s.mean_margin},
           {"fraction_positive_margin", s.fraction_positive_margin}};
}

DpoSummary batch_dpo_report(const std::vector<PreferencePair>& pairs, const std::vector<LogProbRecord>& logprobs,
                            LogProbMode mode, double beta) {
  std::unordered_map<std::string, const LogProbRecord*> by_id;
  for (const auto& r : logprobs) by_id.emplace(r.pair_id, &r);

  DpoSummary out;
  std::size_t positive = 0;
  for (const auto& pair : pairs) {
    const auto id = pair.pair_id();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::MissingLogprobs, "no log-probs for pair " + id);
    auto lp = it->second->logprobs;
    lp.beta = beta;
    const auto r = dpo_loss(lp, mode);
    out.mean_loss += r.loss;
    out.mean_margin += r.margin;
    if (r.margin > 0.0) ++positive;
    ++out.pairs;
  }
  if (out.pairs > 0) {
    const auto n = static_cast<double>(out.pairs);
    out.mean_loss /= n;
    out.mean_margin /= n;
    out.fraction_positive_margin = static_cast<double>(positive) / n;
  }
  return out;
}

}  // namespace acpo
