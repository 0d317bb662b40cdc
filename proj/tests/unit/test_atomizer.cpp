#include <gtest/gtest.h>

#include "acpo/atomizer.hpp"
#include "acpo/error.hpp"
#include "acpo/hashing.hpp"
#include "oracles/corpus.hpp"

using namespace acpo;

namespace {

std::vector<std::string> texts(const std::vector<AtomicFact>& facts) {
  std::vector<std::string> out;
  for (const auto& f : facts) out.push_back(f.text);
  return out;
}

std::vector<AtomicFact> facts_of(const std::string& text) {
  return split_into_facts(make_response("q", 0, text, 1.0, 0));
}

using Sentences = std::vector<std::string>;

}  // namespace

TEST(Atomizer, TwoTerminatedSentences) {
  const auto f = facts_of("De Beers was founded in 1888. It controlled 90% of production.");
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].position, 0);
  EXPECT_EQ(f[1].position, 1);
  EXPECT_EQ(f[0].text, "De Beers was founded in 1888.");
  EXPECT_EQ(f[1].fact_id, "q:0:1");
}

TEST(Atomizer, AbbreviationsDoNotSplit) {
  EXPECT_EQ(split_sentences("Dr. Smith arrived at 5 p.m. He left."),
            (Sentences{"Dr. Smith arrived at 5 p.m.", "He left."}));
  EXPECT_EQ(split_sentences("Meet me at 5 p.m. tomorrow."), (Sentences{"Meet me at 5 p.m. tomorrow."}));
  EXPECT_EQ(split_sentences("See Fig. 2 and No. 5 here."), (Sentences{"See Fig. 2 and No. 5 here."}));
  EXPECT_EQ(split_sentences("It was e.g. True. Then more."), (Sentences{"It was e.g. True.", "Then more."}));
}

TEST(Atomizer, NumberedListPrefixStripped) {
  const auto f = facts_of("1. De Beers' monopoly began in the late 19th century...");
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].text, "De Beers' monopoly began in the late 19th century...");
}

TEST(Atomizer, ListItemsAreSeparateFacts) {
  EXPECT_EQ(split_sentences("1. Born in Paris\n2. Died in Rome\n* Loved cats\n- Wrote books"),
            (Sentences{"Born in Paris", "Died in Rome", "Loved cats", "Wrote books"}));
  // A four-digit year at a line start is not a list marker.
  EXPECT_EQ(split_sentences("The firm was founded in\n1888. It grew."), (Sentences{"The firm was founded in 1888.", "It grew."}));
}

TEST(Atomizer, MarkdownStripped) {
  EXPECT_EQ(split_sentences("# Title here\n> **Bold** claim is __here__."),
            (Sentences{"Title here", "Bold claim is here."}));
}

TEST(Atomizer, QuotesAndParenthesesProtectInnerTerminators) {
  EXPECT_EQ(split_sentences("She said \"Go home. Now.\" He went."),
            (Sentences{"She said \"Go home. Now.\"", "He went."}));
  EXPECT_EQ(split_sentences("The rule (see A. It is long.) held. Next one."),
            (Sentences{"The rule (see A. It is long.) held.", "Next one."}));
  // An unbalanced quote must not swallow the rest of the response.
  EXPECT_EQ(split_sentences("He said \"wait. Then it ended. Done here."),
            (Sentences{"He said \"wait.", "Then it ended.", "Done here."}));
}

TEST(Atomizer, ShortFactsExcluded) {
  const auto f = facts_of("Yes. The capital of France is Paris.");
  ASSERT_EQ(f.size(), 2u);
  EXPECT_TRUE(f[0].excluded);
  EXPECT_FALSE(f[1].excluded);
  AtomizerConfig strict{6};
  const auto g = split_into_facts(make_response("q", 0, "The capital of France is Paris.", 1, 0), strict);
  EXPECT_FALSE(g[0].excluded);
  const auto h = split_into_facts(make_response("q", 0, "Paris is the capital.", 1, 0), strict);
  EXPECT_TRUE(h[0].excluded);
}

TEST(Atomizer, DegenerateResponsesThrowNoSentences) {
  for (const char* text : {"", "   \n\n ", "...", "- \n* ", "**"}) {
    try {
      facts_of(text);
      FAIL() << "expected NO_SENTENCES for '" << text << "'";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NoSentences);
    }
  }
}

TEST(Atomizer, PurePunctuationFragmentsDropped) {
  for (const auto& s : split_sentences("Fine. ... ! It works. -- ?")) {
    EXPECT_TRUE(std::any_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); }))
        << s;
  }
}

TEST(Atomizer, WordCount) {
  EXPECT_EQ(word_count(""), 0);
  EXPECT_EQ(word_count("  one  two\tthree "), 3);
}

TEST(Atomizer, CorpusExactMatch) {
  const auto corpus = oracle::load_corpus(std::string(ACPO_TEST_DATA) + "/atomizer/corpus.jsonl");
  std::size_t gold = 0, matched = 0;
  for (const auto& item : corpus) {
    const auto got = split_sentences(item.text);
    gold += item.sentences.size();
    matched += oracle::matched_sentences(item.sentences, got);
    EXPECT_EQ(got, item.sentences) << item.text;
  }
  EXPECT_EQ(gold, 50u);
  EXPECT_GE(static_cast<double>(matched) / static_cast<double>(gold), 0.95);
}

TEST(Atomizer, TableStyleNumberedList) {
  const auto fx = json::parse(read_file(std::string(ACPO_TEST_DATA) + "/atomizer/numbered_list.json"));
  const auto f = facts_of(fx.at("text").get<std::string>());
  EXPECT_EQ(texts(f), fx.at("facts").get<Sentences>());
}

// Property: facts joined by single spaces reproduce the normalized response,
// positions follow textual order, and no fact is empty.
TEST(Atomizer, CoverageAndDeterminismOnRandomText) {
  const std::vector<std::string> pieces = {
      "The cat sat.", "Dr. Who", "arrived", "at 5 p.m.", "He left!", "\n1. Item one", "\n- bullet point",
      "\n\n", "\"Quoted. Text.\"", "(An aside.)", "U.S.", "Why?", "**bold**", "3.14", "e.g.", "\n## Head",
      "etc.", "The", "It"};
  CounterRng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const auto n = 1 + rng.below(12);
    for (std::uint64_t i = 0; i < n; ++i) {
      text += pieces[rng.below(pieces.size())];
      text += ' ';
    }
    const auto sentences = split_sentences(text);
    EXPECT_EQ(sentences, split_sentences(text));
    std::string joined;
    for (const auto& s : sentences) {
      ASSERT_FALSE(s.empty());
      joined += (joined.empty() ? "" : " ") + s;
    }
    // Pure-punctuation fragments are the only thing allowed to go missing.
    const auto norm = normalize_response(text);
    std::string norm_kept, joined_kept;
    for (char c : norm) if (std::isalnum(static_cast<unsigned char>(c))) norm_kept += c;
    for (char c : joined) if (std::isalnum(static_cast<unsigned char>(c))) joined_kept += c;
    EXPECT_EQ(joined_kept, norm_kept) << text;
    EXPECT_NE(norm.find(sentences.empty() ? std::string() : sentences.front()), std::string::npos) << text;
  }
}

TEST(Atomizer, JoinEqualsNormalizedWhenNoPunctuationFragments) {
  const std::string text = "# Intro\nMarie Curie was born in Warsaw. She won two Nobel Prizes.\n\n1. **Physics** in 1903.\n2. Chemistry in 1911.";
  std::string joined;
  for (const auto& s : split_sentences(text)) joined += (joined.empty() ? "" : " ") + s;
  EXPECT_EQ(joined, normalize_response(text));
}
