#include <gtest/gtest.h>

#include "acpo/asc.hpp"
#include "acpo/error.hpp"
#include "acpo/jsonl.hpp"

using namespace acpo;

namespace {

ScoredResponse scored(int index, int score) { return {"q", index, score, {}}; }

AscConfig offline_config() {
  AscConfig cfg;
  cfg.sampling.m = 6;
  return cfg;
}

}  // namespace

TEST(Asc, SelectBestPrefersLowestIndexOnTies) {
  EXPECT_EQ(select_best({scored(0, 1), scored(1, 4), scored(2, 4), scored(3, -2)}), 1u);
  // Position and sample_index can differ; the tie still goes to the lower index.
  EXPECT_EQ(select_best({scored(5, 3), scored(2, 3), scored(7, 1)}), 1u);
  EXPECT_EQ(select_best({scored(0, -3)}), 0u);
  try {
    select_best({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(Asc, SelectsFromRecordedResponses) {
  const auto responses = read_jsonl<ResponseSample>(std::filesystem::path(ACPO_TEST_DATA) / "e2e/replay/curie.jsonl");
  const Embedder embedder(OfflineHashBackend{64, 0});
  const auto r = asc_select_from(responses, offline_config(), embedder);
  ASSERT_EQ(r.all_scored.size(), responses.size());
  const auto best = select_best(r.all_scored);
  EXPECT_EQ(r.selected, responses[best]);
  for (const auto& s : r.all_scored) EXPECT_LE(s.score, r.all_scored[best].score);
  double sum = 0;
  for (const auto& s : r.all_scored) sum += s.score;
  EXPECT_DOUBLE_EQ(r.mean_score, sum / static_cast<double>(responses.size()));
  EXPECT_FALSE(r.clusters.empty());
  EXPECT_FALSE(r.facts.empty());
}

TEST(Asc, SingleResponseIsSelected) {
  const std::vector<ResponseSample> one{make_response("q", 0, "Only one answer here.", 1.0, 0)};
  const Embedder embedder(OfflineHashBackend{16, 0});
  const auto r = asc_select_from(one, offline_config(), embedder);
  EXPECT_EQ(r.selected, one[0]);
  EXPECT_EQ(r.all_scored[0].score, -1);
}

TEST(Asc, ReplayBackendEndToEnd) {
  SamplingBackend backend;
  backend.mode = SamplingMode::Replay;
  backend.fixture_dir = std::filesystem::path(ACPO_TEST_DATA) / "e2e/replay";
  const Question q{"lovelace", "Tell me a bio of Ada Lovelace.", ""};
  const Embedder embedder(OfflineHashBackend{64, 0});
  const auto r = asc_select(q, offline_config(), backend, embedder);
  EXPECT_EQ(r.responses.size(), 6u);
  EXPECT_EQ(r.selected.question_id, "lovelace");
}
