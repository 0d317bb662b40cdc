#include "acpo/atomizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "acpo/error.hpp"

namespace acpo {
namespace {

constexpr std::string_view kLeftDq = "\xE2\x80\x9C";   // “
constexpr std::string_view kRightDq = "\xE2\x80\x9D";  // ”
constexpr std::string_view kLeftSq = "\xE2\x80\x98";   // ‘
constexpr std::string_view kRightSq = "\xE2\x80\x99";  // ’
constexpr std::string_view kBullet = "\xE2\x80\xA2";   // •

// Abbreviations after which a sentence never ends.
constexpr std::array<std::string_view, 11> kNeverTerminal = {
    "dr.", "mr.", "mrs.", "ms.", "st.", "vs.", "no.", "fig.", "prof.", "e.g.", "i.e."};

// Abbreviations that may also end a sentence; a break is taken only when the
// next word is a typical sentence opener.
constexpr std::array<std::string_view, 4> kMaybeTerminal = {"etc.", "u.s.", "p.m.", "a.m."};

constexpr std::array<std::string_view, 52> kSentenceOpeners = {
    "the",     "a",       "an",      "he",      "she",   "it",     "they",  "we",    "i",
    "you",     "this",    "that",    "these",   "those", "there",  "his",   "her",   "its",
    "their",   "our",     "my",      "in",      "on",    "at",     "after", "before", "however",
    "but",     "and",     "as",      "during",  "today", "then",   "also",  "some",  "many",
    "most",    "another", "one",     "each",    "by",    "from",   "for",   "with",  "when",
    "while",   "although", "since",  "because", "if",    "other",  "later"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

std::string_view ltrim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Length of a heading marker ("#".."######" + space) at the start of `s`.
std::size_t heading_marker(std::string_view s) {
  std::size_t n = 0;
  while (n < s.size() && s[n] == '#') ++n;
  if (n == 0 || n > 6 || n >= s.size() || !is_space(s[n])) return 0;
  return n + 1;
}

// Length of a list marker ("1.", "12)", "-", "*", "+", "•", then space).
// Numbers are capped at three digits so a wrapped "1888. It ..." line is
// not mistaken for a list item.
std::size_t list_marker(std::string_view s) {
  std::size_t n = 0;
  if (s.starts_with(kBullet)) {
    n = kBullet.size();
  } else if (!s.empty() && (s[0] == '-' || s[0] == '*' || s[0] == '+')) {
    n = 1;
  } else {
    while (n < s.size() && std::isdigit(static_cast<unsigned char>(s[n]))) ++n;
    if (n == 0 || n > 3 || n >= s.size() || (s[n] != '.' && s[n] != ')')) return 0;
    ++n;
  }
  if (n >= s.size() || !is_space(s[n])) return 0;
  return n + 1;
}

bool is_heading_line(std::string_view raw) { return heading_marker(ltrim(raw)) > 0; }
bool is_list_line(std::string_view raw) { return list_marker(ltrim(raw)) > 0; }

std::string strip_emphasis(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '*') continue;
    if (s[i] == '_' && i + 1 < s.size() && s[i + 1] == '_') {
      ++i;
      continue;
    }
    out += s[i];
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

// Groups lines into blocks that sentences never cross: paragraph breaks,
// headings and list items all start a new block.
std::vector<std::string> segment_blocks(std::string_view text) {
  std::vector<std::string> blocks;
  std::string current;
  auto flush = [&] {
    auto collapsed = collapse_whitespace(current);
    if (!collapsed.empty()) blocks.push_back(std::move(collapsed));
    current.clear();
  };
  for (auto raw : split_lines(text)) {
    const std::string line = normalize_line(raw);
    if (line.empty()) {
      flush();
    } else if (is_heading_line(raw)) {
      flush();
      current = line;
      flush();
    } else if (is_list_line(raw)) {
      flush();
      current = line;
    } else {
      current += ' ';
      current += line;
    }
  }
  flush();
  return blocks;
}

bool has_content(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u >= 0x80;
  });
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool starts_sentence(std::string_view rest) {
  if (rest.empty()) return false;
  const auto c = static_cast<unsigned char>(rest[0]);
  if (std::isupper(c) || std::isdigit(c) || c == '"' || c == '\'' || c == '(') return true;
  if (rest.starts_with(kLeftDq) || rest.starts_with(kLeftSq)) return true;
  // Latin-1 supplement capitals (À..Þ) encoded as C3 80..C3 9E.
  return c == 0xC3 && rest.size() > 1 && static_cast<unsigned char>(rest[1]) >= 0x80 &&
         static_cast<unsigned char>(rest[1]) <= 0x9E;
}

std::string first_word(std::string_view rest) {
  std::size_t n = 0;
  while (n < rest.size() && std::isalpha(static_cast<unsigned char>(rest[n]))) ++n;
  return lower(rest.substr(0, n));
}

// Token ending at the terminator, e.g. "Dr." or "(e.g.".
std::string_view token_before(std::string_view s, std::size_t period_pos, std::size_t floor) {
  std::size_t b = period_pos;
  while (b > floor && !is_space(s[b - 1])) --b;
  auto tok = s.substr(b, period_pos - b + 1);
  while (!tok.empty() && (tok.front() == '(' || tok.front() == '"' || tok.front() == '\'')) {
    tok.remove_prefix(1);
  }
  return tok;
}

// "U.S.", "p.m.": single letters each followed by a period.
bool is_dotted_initialism(std::string_view tok) {
  if (tok.size() < 4 || tok.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < tok.size(); i += 2) {
    if (!std::isalpha(static_cast<unsigned char>(tok[i])) || tok[i + 1] != '.') return false;
  }
  return true;
}

enum class AbbrevKind { None, NeverTerminal, MaybeTerminal };

AbbrevKind classify_abbreviation(std::string_view tok) {
  const std::string t = lower(tok);
  if (std::find(kNeverTerminal.begin(), kNeverTerminal.end(), t) != kNeverTerminal.end()) {
    return AbbrevKind::NeverTerminal;
  }
  // A lone capital initial, as in "J. K. Rowling".
  if (tok.size() == 2 && std::isupper(static_cast<unsigned char>(tok[0]))) {
    return AbbrevKind::NeverTerminal;
  }
  if (std::find(kMaybeTerminal.begin(), kMaybeTerminal.end(), t) != kMaybeTerminal.end() ||
      is_dotted_initialism(tok)) {
    return AbbrevKind::MaybeTerminal;
  }
  return AbbrevKind::None;
}

bool is_opener(const std::string& word) {
  return std::find(kSentenceOpeners.begin(), kSentenceOpeners.end(), word) != kSentenceOpeners.end();
}

struct Nesting {
  bool track_straight = true;
  bool track_curly = true;
  bool track_parens = true;
  int parens = 0;
  int curly = 0;
  bool in_straight = false;

  explicit Nesting(std::string_view s) {
    const auto straight = std::count(s.begin(), s.end(), '"');
    track_straight = straight % 2 == 0;
    std::size_t opens = 0, closes = 0;
    for (std::size_t p = s.find(kLeftDq); p != std::string_view::npos; p = s.find(kLeftDq, p + 1)) ++opens;
    for (std::size_t p = s.find(kRightDq); p != std::string_view::npos; p = s.find(kRightDq, p + 1)) ++closes;
    track_curly = opens == closes;
    track_parens = std::count(s.begin(), s.end(), '(') == std::count(s.begin(), s.end(), ')');
  }

  // Updates state for the character(s) at `i`; returns bytes consumed.
  std::size_t feed(std::string_view s, std::size_t i) {
    if (s.substr(i).starts_with(kLeftDq)) {
      ++curly;
      return kLeftDq.size();
    }
    if (s.substr(i).starts_with(kRightDq)) {
      curly = std::max(0, curly - 1);
      return kRightDq.size();
    }
    if (s[i] == '"') in_straight = !in_straight;
    if (s[i] == '(') ++parens;
    if (s[i] == ')') parens = std::max(0, parens - 1);
    return 1;
  }

  bool at_top_level() const {
    return (!track_parens || parens == 0) && (!track_curly || curly == 0) &&
           (!track_straight || !in_straight);
  }
};

bool is_closer(std::string_view rest) {
  if (rest.empty()) return false;
  return rest[0] == '"' || rest[0] == '\'' || rest[0] == ')' || rest.starts_with(kRightDq) ||
         rest.starts_with(kRightSq);
}

void split_block(std::string_view s, std::vector<std::string>& out) {
  Nesting nest(s);
  std::size_t start = 0;
  std::size_t i = 0;
  auto emit = [&](std::size_t end) {
    auto sentence = collapse_whitespace(s.substr(start, end - start));
    if (has_content(sentence)) out.push_back(std::move(sentence));
  };
  while (i < s.size()) {
    if (!is_terminator(s[i])) {
      i += nest.feed(s, i);
      continue;
    }
    const std::size_t term_pos = i;
    while (i < s.size() && is_terminator(s[i])) ++i;
    const bool single_period = (i - term_pos == 1) && s[term_pos] == '.';
    while (i < s.size() && is_closer(s.substr(i))) i += nest.feed(s, i);
    if (i >= s.size() || !is_space(s[i])) continue;
    std::size_t next = i;
    while (next < s.size() && is_space(s[next])) ++next;
    const auto rest = s.substr(next);
    if (!starts_sentence(rest) || !nest.at_top_level()) continue;
    if (single_period) {
      const auto kind = classify_abbreviation(token_before(s, term_pos, start));
      if (kind == AbbrevKind::NeverTerminal) continue;
      if (kind == AbbrevKind::MaybeTerminal && !is_opener(first_word(rest))) continue;
    }
    emit(i);
    start = next;
    i = next;
  }
  if (start < s.size()) emit(s.size());
}

}  // namespace

std::string normalize_line(std::string_view line) {
  auto s = ltrim(line);
  if (s.starts_with("> ")) s.remove_prefix(2);
  s.remove_prefix(heading_marker(s));
  s.remove_prefix(list_marker(s));
  return collapse_whitespace(strip_emphasis(s));
}

std::string normalize_response(std::string_view text) {
  std::string joined;
  for (auto raw : split_lines(text)) {
    joined += normalize_line(raw);
    joined += ' ';
  }
  return collapse_whitespace(joined);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& block : segment_blocks(text)) split_block(block, out);
  return out;
}

int word_count(std::string_view s) {
  int n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::vector<AtomicFact> split_into_facts(const ResponseSample& response, const AtomizerConfig& cfg) {
  const auto sentences = split_sentences(response.text);
  if (sentences.empty()) {
    throw Error(ErrorCode::NoSentences, "response " + response.question_id + "/" +
                                            std::to_string(response.sample_index) +
                                            " has no sentences after normalization");
  }
  std::vector<AtomicFact> facts;
  facts.reserve(sentences.size());
  int position = 0;
  for (const auto& sentence : sentences) {
    AtomicFact f;
    f.fact_id = make_fact_id(response.question_id, response.sample_index, position);
    f.question_id = response.question_id;
    f.sample_index = response.sample_index;
    f.position = position++;
    f.text = sentence;
    f.excluded = word_count(sentence) < cfg.min_words;
    facts.push_back(std::move(f));
  }
  return facts;
}

}  // namespace acpo
