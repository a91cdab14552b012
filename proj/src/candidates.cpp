#include "chulo/candidates.hpp"

#include <unordered_map>

namespace chulo {

namespace {
bool admissible(PosTag t) { return is_noun(t) || t == PosTag::JJ; }
}  // namespace

std::vector<Span> match_candidate_spans(const std::vector<PosTag>& tags) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < tags.size()) {
    if (!admissible(tags[i])) {
      ++i;
      continue;
    }
    // Longest admissible run from i; the match ends at its last noun.
    std::size_t run_end = i;
    std::size_t last_noun = tags.size();
    while (run_end < tags.size() && admissible(tags[run_end])) {
      if (is_noun(tags[run_end])) last_noun = run_end;
      ++run_end;
    }
    if (last_noun == tags.size()) {
      // A run with no noun cannot contain a match at any later start either.
      i = run_end;
      continue;
    }
    spans.push_back({i, last_noun});
    i = last_noun + 1;
  }
  return spans;
}

std::string normalize_phrase(const std::vector<std::string>& tokens, Span span) {
  std::string out;
  for (std::size_t k = span.start; k <= span.end; ++k) {
    if (k > span.start) out.push_back(' ');
    for (char ch : tokens[k]) {
      out.push_back(static_cast<unsigned char>(ch) < 0x80
                        ? static_cast<char>(std::tolower(static_cast<unsigned char>(ch)))
                        : ch);
    }
  }
  return out;
}

std::vector<CandidatePhrase> extract_candidates(const PosTaggedDocument& tagged,
                                                std::size_t max_candidates) {
  std::vector<CandidatePhrase> out;
  std::unordered_map<std::string, std::size_t> by_surface;
  for (const Span& span : match_candidate_spans(tagged.tags)) {
    std::string surface = normalize_phrase(tagged.tokens, span);
    auto it = by_surface.find(surface);
    if (it != by_surface.end()) {
      out[it->second].all_occurrences.push_back(span);
      continue;
    }
    if (out.size() >= max_candidates) continue;
    by_surface.emplace(surface, out.size());
    CandidatePhrase phrase;
    phrase.surface = std::move(surface);
    phrase.first_occurrence = span.start;
    phrase.token_span_length = span.length();
    phrase.all_occurrences.push_back(span);
    out.push_back(std::move(phrase));
  }
  return out;
}

}  // namespace chulo
