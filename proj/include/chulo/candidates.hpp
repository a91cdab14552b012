#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "chulo/pos_tagger.hpp"

namespace chulo {

/// Inclusive token span [start, end] in document coordinates.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct CandidatePhrase {
  std::string surface;  // lowercased tokens joined by single spaces
  std::size_t first_occurrence = 0;
  std::size_t token_span_length = 0;
  std::vector<Span> all_occurrences;
};

inline constexpr std::size_t kDefaultCandidateCap = 256;

/// Maximal leftmost-longest, non-overlapping matches of the tag pattern
/// (NN.*|JJ)*(NN.*), deduplicated by normalized surface and ordered by first
/// occurrence. At most `max_candidates` phrases are kept.
std::vector<CandidatePhrase> extract_candidates(const PosTaggedDocument& tagged,
                                                std::size_t max_candidates = kDefaultCandidateCap);

/// Raw matches before deduplication, in document order.
std::vector<Span> match_candidate_spans(const std::vector<PosTag>& tags);

std::string normalize_phrase(const std::vector<std::string>& tokens, Span span);

}  // namespace chulo
