#include "acpo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acpo/error.hpp"
#include "acpo/hashing.hpp"
#include "acpo/parallel.hpp"
#include "acpo/stages.hpp"

namespace acpo {

FactWorld default_world(int n_true, double emission, double hallucination_rate, std::uint64_t seed) {
  FactWorld w;
  for (int i = 0; i < n_true; ++i) {
    w.true_facts.push_back({"The subject has verified property number " + std::to_string(i) + ".", emission});
  }
  w.hallucination_rate = hallucination_rate;
  w.min_facts_per_response = n_true;
  w.max_facts_per_response = n_true + n_true / 2;
  w.seed = seed;
  return w;
}

void validate(const FactWorld& w) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::ConfigInvalid, std::string("world: ") + what);
  };
  require(!w.true_facts.empty(), "needs at least one true fact");
  for (const auto& f : w.true_facts) {
    require(f.emission > 0.0 && f.emission <= 1.0, "emission probabilities must be in (0, 1]");
    require(!f.text.empty(), "true fact text is empty");
  }
  require(w.hallucination_rate >= 0.0 && w.hallucination_rate < 1.0, "hallucination_rate must be in [0, 1)");
  require(w.min_facts_per_response >= 1 && w.max_facts_per_response >= w.min_facts_per_response,
          "facts_per_response must be a positive range");
  require(w.paraphrase_noise >= 0.0, "paraphrase_noise must be >= 0");
  require(w.sticky_hallucination_prob >= 0.0 && w.sticky_hallucination_prob <= 1.0,
          "sticky_hallucination_prob must be in [0, 1]");
}

void to_json(json& j, const FactWorld& w) {
  json facts = json::array();
  for (const auto& f : w.true_facts) facts.push_back({{"text", f.text}, {"emission", f.emission}});
  j = json{{"true_facts", facts},
           {"hallucination_rate", w.hallucination_rate},
           {"facts_per_response", {w.min_facts_per_response, w.max_facts_per_response}},
           {"paraphrase_noise", w.paraphrase_noise},
           {"sticky_hallucination_prob", w.sticky_hallucination_prob},
           {"seed", w.seed}};
}

void from_json(const json& j, FactWorld& w) {
  if (j.contains("true_facts")) {
    w = FactWorld{};
    for (const auto& f : j.at("true_facts")) w.true_facts.push_back({f.at("text"), f.value("emission", 0.8)});
    w.hallucination_rate = j.value("hallucination_rate", w.hallucination_rate);
  } else {
    w = default_world(j.value("n_true_facts", 10), j.value("emission", 0.8), j.value("hallucination_rate", 0.3));
  }
  if (j.contains("facts_per_response")) {
    const auto& range = j.at("facts_per_response");
    w.min_facts_per_response = range.at(0);
    w.max_facts_per_response = range.at(1);
  }
  w.paraphrase_noise = j.value("paraphrase_noise", 0.0);
  w.sticky_hallucination_prob = j.value("sticky_hallucination_prob", 0.0);
  w.seed = j.value("seed", std::uint64_t{0});
}

std::string_view to_string(FactTruth t) { return t == FactTruth::True ? "TRUE" : "HALLUCINATED"; }

SimulatedQuestion simulate_responses(const FactWorld& world, int m, const std::string& question_id) {
  validate(world);
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "m must be positive");
  CounterRng rng(hash_combine(world.seed, fnv1a64(question_id)));

  SimulatedQuestion out;
  out.question = {question_id, "Describe the subject in as much specific detail as possible.",
                  std::string(kDefaultSystemPrompt)};
  std::vector<std::string> hallucination_pool;
  int next_hallucination = 0;

  for (int s = 0; s < m; ++s) {
    std::vector<std::size_t> emitted;
    for (std::size_t i = 0; i < world.true_facts.size(); ++i) {
      if (rng.bernoulli(world.true_facts[i].emission)) emitted.push_back(i);
    }
    // Fisher-Yates on the portable generator.
    for (std::size_t i = emitted.size(); i > 1; --i) std::swap(emitted[i - 1], emitted[rng.below(i)]);

    const auto span = static_cast<std::uint64_t>(world.max_facts_per_response - world.min_facts_per_response + 1);
    const int slots = world.min_facts_per_response + static_cast<int>(rng.below(span));
    std::size_t next_true = 0;
    std::string text;
    int position = 0;
    for (int slot = 0; slot < slots; ++slot) {
      std::string sentence;
      FactTruth truth;
      if (rng.bernoulli(world.hallucination_rate)) {
        if (!hallucination_pool.empty() && rng.bernoulli(world.sticky_hallucination_prob)) {
          sentence = hallucination_pool[rng.below(hallucination_pool.size())];
        } else {
          sentence = "The subject has fabricated detail " + std::to_string(next_hallucination++) + ".";
          hallucination_pool.push_back(sentence);
        }
        truth = FactTruth::Hallucinated;
      } else if (next_true < emitted.size()) {
        sentence = world.true_facts[emitted[next_true++]].text;
        truth = FactTruth::True;
      } else {
        continue;
      }
      if (!text.empty()) text += ' ';
      text += sentence;
      out.ground_truth[make_fact_id(question_id, s, position++)] = truth;
    }
    if (text.empty()) {
      // Keep every response non-empty; a lone hallucination is the least
      // informative filler.
      text = "The subject has fabricated detail " + std::to_string(next_hallucination++) + ".";
      out.ground_truth[make_fact_id(question_id, s, 0)] = FactTruth::Hallucinated;
    }
    out.responses.push_back(make_response(question_id, s, std::move(text), 1.0, derive_seed(world.seed, question_id, s)));
  }
  return out;
}

void jitter_embeddings(std::vector<FactEmbedding>& embeddings, double magnitude, std::uint64_t seed) {
  if (magnitude <= 0.0) return;
  for (auto& e : embeddings) {
    CounterRng rng(hash_combine(seed, fnv1a64(e.fact_id)));
    const double scale = magnitude / std::sqrt(static_cast<double>(e.dim()));
    std::vector<double> v(e.dim());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(e.vector[k]) + scale * rng.normal();
    e.vector = l2_normalize(v);
  }
}

void to_json(json& j, const PrecisionReport& r) {
  json rows = json::array();
  for (const auto& p : r.responses) {
    json row{{"question_id", p.question_id}, {"sample_index", p.sample_index}, {"score", p.score}, {"facts", p.facts}};
    row["precision"] = p.precision ? json(*p.precision) : json(nullptr);
    rows.push_back(std::move(row));
  }
  j = json{{"responses", rows},
           {"pearson", r.pearson ? json(*r.pearson) : json("NOT_APPLICABLE")},
           {"spearman", r.spearman ? json(*r.spearman) : json("NOT_APPLICABLE")}};
}

std::optional<double> pearson_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) return std::nullopt;
  return pearson_correlation(average_ranks(x), average_ranks(y));
}

PrecisionReport precision_report(const std::vector<ScoredResponse>& scored,
                                 const std::map<std::string, FactTruth>& ground_truth) {
  PrecisionReport out;
  std::vector<double> scores, precisions;
  for (const auto& s : scored) {
    ResponsePrecision row{s.question_id, s.sample_index, s.score, static_cast<int>(s.verdicts.size()), std::nullopt};
    int true_count = 0;
    for (const auto& v : s.verdicts) {
      auto it = ground_truth.find(v.fact_id);
      if (it == ground_truth.end()) throw Error(ErrorCode::UnknownFact, "no ground truth for fact " + v.fact_id);
      if (it->second == FactTruth::True) ++true_count;
    }
    if (!s.verdicts.empty()) {
      row.precision = static_cast<double>(true_count) / static_cast<double>(s.verdicts.size());
      scores.push_back(s.score);
      precisions.push_back(*row.precision);
    }
    out.responses.push_back(row);
  }
  out.pearson = pearson_correlation(scores, precisions);
  out.spearman = spearman_correlation(scores, precisions);
  return out;
}

SimulationRun run_simulation(const FactWorld& world, const SimulationConfig& cfg) {
  validate(world);
  if (cfg.trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be positive");

  struct Trial {
    SimulatedQuestion sim;
    std::vector<AtomicFact> facts;
    std::vector<FactEmbedding> embeddings;
    std::vector<FactCluster> clusters;
    std::vector<ScoredResponse> scored;
    std::vector<PreferencePair> pairs;
  };
  std::vector<Trial> trials(static_cast<std::size_t>(cfg.trials));
  const Embedder embedder(OfflineHashBackend{cfg.embedding_dim, world.seed});

  parallel_for(trials.size(), cfg.threads, [&](std::size_t t) {
    auto trial_world = world;
    trial_world.seed = hash_combine(world.seed, t);
    auto& tr = trials[t];
    tr.sim = simulate_responses(trial_world, cfg.m, "sim-" + std::to_string(t));
    tr.facts = atomize_all(tr.sim.responses, AtomizerConfig{});
    tr.embeddings = embed_all(tr.facts, embedder);
    jitter_embeddings(tr.embeddings, world.paraphrase_noise, trial_world.seed);
    tr.clusters = cluster_all(tr.facts, tr.embeddings, cfg.clustering, cfg.scoring).clusters;
    tr.scored = score_all(tr.sim.responses, tr.facts, tr.clusters, cfg.scoring);
    tr.pairs = curate_pairs(tr.sim.question, tr.scored, tr.sim.responses, cfg.strategy);
  });

  SimulationRun run;
  for (auto& tr : trials) {
    run.questions.push_back(tr.sim.question);
    auto append = [](auto& dst, auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    append(run.responses, tr.sim.responses);
    append(run.facts, tr.facts);
    append(run.embeddings, tr.embeddings);
    append(run.clusters, tr.clusters);
    append(run.scored, tr.scored);
    append(run.pairs, tr.pairs);
    run.ground_truth.insert(tr.sim.ground_truth.begin(), tr.sim.ground_truth.end());
  }
  run.precision = precision_report(run.scored, run.ground_truth);
  return run;
}

}  // namespace acpo
