#include <gtest/gtest.h>

#include <cmath>
#include <optional>

#include "acpo/dpo.hpp"
#include "acpo/error.hpp"
#include "acpo/hashing.hpp"
#include "oracles/oracles.hpp"

using namespace acpo;

namespace {

std::vector<double> random_logprobs(CounterRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = -0.01 - 5.0 * rng.uniform();
  return v;
}

PairLogProbs random_pair(CounterRng& rng) {
  PairLogProbs p;
  const auto tw = 1 + rng.below(20), tl = 1 + rng.below(20);
  p.chosen_policy = random_logprobs(rng, tw);
  p.chosen_ref = random_logprobs(rng, tw);
  p.rejected_policy = random_logprobs(rng, tl);
  p.rejected_ref = random_logprobs(rng, tl);
  p.beta = 0.05 + rng.uniform();
  return p;
}

std::optional<ErrorCode> code_of(const PairLogProbs& p) {
  try {
    dpo_loss(p);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST(Dpo, ZeroMarginIsLn2) {
  PairLogProbs p{{-1.0, -2.0}, {-1.0, -2.0}, {-3.0}, {-3.0}, 0.1};
  for (auto mode : {LogProbMode::Total, LogProbMode::Average}) {
    const auto r = dpo_loss(p, mode);
    EXPECT_EQ(r.margin, 0.0);
    EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
  }
}

TEST(Dpo, UnitMargin) {
  PairLogProbs p{{-1.0}, {-2.0}, {-1.0}, {-1.0}, 1.0};
  const auto r = dpo_loss(p);
  EXPECT_DOUBLE_EQ(r.margin, 1.0);
  EXPECT_NEAR(r.loss, 0.313262, 1e-6);
  EXPECT_NEAR(r.loss, std::log1p(std::exp(-1.0)), 1e-15);
}

TEST(Dpo, AverageModeDividesByLength) {
  PairLogProbs p{{-1.0, -1.0}, {-2.0, -2.0}, {-1.0}, {-1.0}, 1.0};
  EXPECT_DOUBLE_EQ(dpo_loss(p, LogProbMode::Total).margin, 2.0);
  EXPECT_DOUBLE_EQ(dpo_loss(p, LogProbMode::Average).margin, 1.0);
}

TEST(Dpo, StableAtExtremeMargins) {
  for (double x : {1e4, -1e4, 800.0, -800.0, 40.0, -40.0}) {
    EXPECT_TRUE(std::isfinite(neg_log_sigmoid(x))) << x;
    EXPECT_TRUE(std::isfinite(sigmoid(x))) << x;
  }
  EXPECT_NEAR(neg_log_sigmoid(-1e4), 1e4, 1e-9);
  EXPECT_GE(neg_log_sigmoid(1e4), 0.0);
  EXPECT_NEAR(neg_log_sigmoid(-800.0), 800.0, 1e-9);

  PairLogProbs p{{-0.01}, {-1e4}, {-1e4}, {-0.01}, 1.0};
  const auto r = dpo_loss(p);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_TRUE(std::isfinite(r.grad_chosen[0]));
  std::swap(p.chosen_policy, p.rejected_policy);
  std::swap(p.chosen_ref, p.rejected_ref);
  const auto s = dpo_loss(p);
  EXPECT_TRUE(std::isfinite(s.loss));
  EXPECT_NEAR(s.loss, -s.margin, 1e-6);
}

TEST(Dpo, GradientsMatchFiniteDifferences) {
  CounterRng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_pair(rng);
    for (auto mode : {LogProbMode::Total, LogProbMode::Average}) {
      const auto r = dpo_loss(p, mode);
      std::vector<double> x = p.chosen_policy;
      x.insert(x.end(), p.rejected_policy.begin(), p.rejected_policy.end());
      const auto tw = p.chosen_policy.size();
      auto f = [&](const std::vector<double>& v) {
        PairLogProbs q = p;
        q.chosen_policy.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(tw));
        q.rejected_policy.assign(v.begin() + static_cast<std::ptrdiff_t>(tw), v.end());
        return dpo_loss(q, mode).loss;
      };
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double analytic = i < tw ? r.grad_chosen[i] : r.grad_rejected[i - tw];
        const double fd = oracle::central_difference(f, x, i, 1e-6);
        const double rel = std::abs(analytic - fd) / std::max(std::abs(analytic), 1e-300);
        EXPECT_LT(rel, 1e-6) << "trial " << trial << " i " << i;
      }
    }
  }
}

TEST(Dpo, ValidationErrors) {
  PairLogProbs ok{{-1.0}, {-1.0}, {-1.0}, {-1.0}, 0.1};
  EXPECT_NO_THROW(validate(ok));
  auto p = ok;
  p.chosen_ref.push_back(-1.0);
  EXPECT_EQ(code_of(p), ErrorCode::LengthMismatch);
  p = ok;
  p.rejected_policy.push_back(-1.0);
  EXPECT_EQ(code_of(p), ErrorCode::LengthMismatch);
  p = ok;
  p.beta = 0.0;
  EXPECT_EQ(code_of(p), ErrorCode::NonpositiveBeta);
  p.beta = -1;
  EXPECT_EQ(code_of(p), ErrorCode::NonpositiveBeta);
  p = ok;
  p.chosen_policy[0] = 0.5;
  EXPECT_EQ(code_of(p), ErrorCode::InvalidArgument);
  p = PairLogProbs{{}, {}, {-1.0}, {-1.0}, 0.1};
  EXPECT_EQ(code_of(p), ErrorCode::InvalidArgument);
  EXPECT_THROW(log_prob_mode_from_string("mean"), Error);
  EXPECT_EQ(log_prob_mode_from_string(to_string(LogProbMode::Average)), LogProbMode::Average);
}

TEST(Dpo, BatchReport) {
  const PreferencePair a{"q", "p", "c", "r", 2, 0, 0, 1, "top1_bottom1"};
  const PreferencePair b{"q2", "p", "c", "r", 1, -1, 3, 2, "top1_bottom1"};
  std::vector<LogProbRecord> recs{
      {a.pair_id(), {{-1.0}, {-2.0}, {-1.0}, {-1.0}, 9.0}},
      {b.pair_id(), {{-2.0}, {-1.0}, {-1.0}, {-1.0}, 9.0}},
  };
  const auto s = batch_dpo_report({a, b}, recs, LogProbMode::Total, 1.0);
  EXPECT_EQ(s.pairs, 2u);
  EXPECT_DOUBLE_EQ(s.mean_margin, 0.0);
  EXPECT_NEAR(s.mean_loss, 0.5 * (neg_log_sigmoid(1.0) + neg_log_sigmoid(-1.0)), 1e-15);
  EXPECT_DOUBLE_EQ(s.fraction_positive_margin, 0.5);

  const auto round = json(recs[0]).get<LogProbRecord>();
  EXPECT_EQ(round.pair_id, recs[0].pair_id);
  EXPECT_EQ(round.logprobs.chosen_ref, recs[0].logprobs.chosen_ref);

  recs.pop_back();
  try {
    batch_dpo_report({a, b}, recs, LogProbMode::Total);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingLogprobs);
  }
}
