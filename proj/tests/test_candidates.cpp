#include <random>
#include <regex>

#include "chulo/candidates.hpp"
#include "doctest.h"

using namespace chulo;

TEST_CASE("default tagger golden tags") {
  const auto& tagger = default_tagger();
  const std::vector<std::string> words = {"the", "big", "dog"};
  CHECK(tagger.tag(words) == std::vector<PosTag>{PosTag::OTHER, PosTag::JJ, PosTag::NN});
  CHECK(tagger.tag_word("dogs") == PosTag::NNS);
  CHECK(tagger.tag_word("cities") == PosTag::NNS);
  CHECK(tagger.tag_word("boxes") == PosTag::NNS);
  CHECK(tagger.tag_word("quickly") == PosTag::RB);
  CHECK(tagger.tag_word("famous") == PosTag::JJ);
  CHECK(tagger.tag_word("1984") == PosTag::CD);
  CHECK(tagger.tag_word(",") == PosTag::PUNCT);
  CHECK(tagger.tag_word("zorblat") == PosTag::NN);  // noun default
  CHECK(tagger.tag_word("paris") == PosTag::NNP);
}

TEST_CASE("pos_tag rejects an empty document") {
  Document empty;
  CHECK_THROWS_WITH_AS(pos_tag(empty, default_tagger()), "empty document", DataError);
}

TEST_CASE("penn tags collapse onto the coarse set") {
  CHECK(coarse_pos_tag("NNS") == PosTag::NNS);
  CHECK(coarse_pos_tag("VBZ") == PosTag::VB);
  CHECK(coarse_pos_tag("JJR") == PosTag::OTHER);
  CHECK(coarse_pos_tag("DT") == PosTag::OTHER);
  CHECK(coarse_pos_tag(",") == PosTag::PUNCT);
}

namespace {
PosTaggedDocument tagged(std::vector<std::string> tokens, std::vector<PosTag> tags) {
  return {std::move(tokens), std::move(tags)};
}

std::string tag_string(const std::vector<PosTag>& tags, std::vector<std::size_t>& offsets) {
  std::string s;
  for (auto t : tags) {
    offsets.push_back(s.size());
    s += "<";
    s += pos_tag_name(t);
    s += ">";
  }
  offsets.push_back(s.size());
  return s;
}

// std::regex (ECMAScript, greedy with backtracking) finds the leftmost match
// and, for this pattern, the longest one at that start.
const std::regex kCandidatePattern("(<(NN[A-Z]*|JJ)>)*<NN[A-Z]*>");

std::vector<Span> regex_oracle(const std::vector<PosTag>& tags) {
  std::vector<std::size_t> offsets;
  const std::string s = tag_string(tags, offsets);
  std::vector<Span> spans;
  auto to_index = [&](std::size_t off) {
    return static_cast<std::size_t>(std::lower_bound(offsets.begin(), offsets.end(), off) -
                                    offsets.begin());
  };
  for (std::sregex_iterator it(s.begin(), s.end(), kCandidatePattern), end; it != end; ++it) {
    const auto begin = static_cast<std::size_t>(it->position());
    const auto stop = begin + static_cast<std::size_t>(it->length());
    spans.push_back({to_index(begin), to_index(stop) - 1});
  }
  return spans;
}
}  // namespace

TEST_CASE("extract_candidates examples") {
  SUBCASE("adjective + noun") {
    auto c = extract_candidates(
        tagged({"the", "big", "dog"}, {PosTag::OTHER, PosTag::JJ, PosTag::NN}));
    REQUIRE(c.size() == 1);
    CHECK(c[0].surface == "big dog");
    CHECK(c[0].first_occurrence == 1);
    CHECK(c[0].token_span_length == 2);
  }
  SUBCASE("bare adjective") {
    CHECK(extract_candidates(tagged({"big"}, {PosTag::JJ})).empty());
  }
  SUBCASE("dedupe keeps earliest") {
    auto c = extract_candidates(
        tagged({"tax", "and", "tax"}, {PosTag::NN, PosTag::OTHER, PosTag::NN}));
    REQUIRE(c.size() == 1);
    CHECK(c[0].surface == "tax");
    CHECK(c[0].first_occurrence == 0);
    CHECK(c[0].all_occurrences == std::vector<Span>{{0, 0}, {2, 2}});
  }
  SUBCASE("trailing adjective is not absorbed") {
    auto spans = match_candidate_spans({PosTag::JJ, PosTag::NN, PosTag::JJ, PosTag::OTHER});
    CHECK(spans == std::vector<Span>{{0, 1}});
  }
  SUBCASE("cap keeps first-occurrence order") {
    auto c = extract_candidates(tagged({"a", "b", "c", "a"}, std::vector<PosTag>(4, PosTag::NN)),
                                2);
    // NN NN NN NN is one maximal match.
    CHECK(c.size() == 1);
    auto d = extract_candidates(
        tagged({"a", ",", "b", ",", "c", ",", "a"},
               {PosTag::NN, PosTag::PUNCT, PosTag::NN, PosTag::PUNCT, PosTag::NN, PosTag::PUNCT,
                PosTag::NN}),
        2);
    REQUIRE(d.size() == 2);
    CHECK(d[0].surface == "a");
    CHECK(d[0].all_occurrences.size() == 2);
    CHECK(d[1].surface == "b");
  }
}

TEST_CASE("candidate spans agree with an independent regex engine") {
  std::mt19937 rng(11);
  const std::vector<PosTag> pool = {PosTag::NN, PosTag::NNS, PosTag::NNP, PosTag::NNPS,
                                    PosTag::JJ, PosTag::VB,  PosTag::OTHER, PosTag::PUNCT};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<PosTag> tags(1 + rng() % 30);
    for (auto& t : tags) t = pool[rng() % pool.size()];
    const auto spans = match_candidate_spans(tags);
    CHECK(spans == regex_oracle(tags));
    for (std::size_t k = 1; k < spans.size(); ++k) CHECK(spans[k - 1].end < spans[k].start);
  }
}

TEST_CASE("extraction is idempotent") {
  std::mt19937 rng(5);
  const std::vector<std::string> words = {"big", "dog", "the", "tax", "runs", "old", "city"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> toks(1 + rng() % 25);
    for (auto& w : toks) w = words[rng() % words.size()];
    const auto doc = pos_tag(toks, default_tagger());
    const auto a = extract_candidates(doc);
    const auto b = extract_candidates(doc);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].surface == b[i].surface);
      CHECK(a[i].all_occurrences == b[i].all_occurrences);
      std::size_t min_start = a[i].all_occurrences.front().start;
      for (const auto& s : a[i].all_occurrences) min_start = std::min(min_start, s.start);
      CHECK(a[i].first_occurrence == min_start);
    }
  }
}
