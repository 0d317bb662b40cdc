#pragma once
// Each sentence of a response is one atomic fact.

#include <string>
#include <string_view>
#include <vector>

#include "acpo/types.hpp"

namespace acpo {

struct AtomizerConfig {
  // Facts with fewer whitespace-delimited words are kept but marked excluded.
  int min_words = 3;
};

// Line-level cleanup applied before splitting: list/heading/blockquote
// markers stripped, emphasis markers removed, whitespace collapsed.
std::string normalize_line(std::string_view line);

// The whole response after the same normalization, lines joined by spaces.
// Joining the facts of a response with single spaces reproduces this string
// (minus any pure-punctuation fragments, which are dropped).
std::string normalize_response(std::string_view text);

// Rule-based sentence segmentation of raw response text.
std::vector<std::string> split_sentences(std::string_view text);

// Throws NoSentences when nothing survives normalization.
std::vector<AtomicFact> split_into_facts(const ResponseSample& response,
                                         const AtomizerConfig& cfg = {});

int word_count(std::string_view s);

}  // namespace acpo
