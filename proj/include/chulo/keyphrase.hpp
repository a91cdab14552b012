#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "chulo/candidates.hpp"
#include "chulo/scorer.hpp"

namespace chulo {

struct SkpConfig {
  double alpha = 0.6;
  double gamma = 1.2e8;
  std::size_t segment_length = 512;
  std::string prompt_template = "The {category} mainly discusses {phrase}";
  std::string category = "document";
  std::size_t top_n = 15;

  /// Throws std::invalid_argument on a broken invariant.
  void validate() const;
};

struct RankedKeyphrase {
  CandidatePhrase phrase;
  double position_penalty = 0.0;
  double logprob_sum = 0.0;            // sum over segments of p_ij
  std::vector<double> segment_scores;  // p_ij, by segment index
  double score = 0.0;
};

/// L_c / l_d + gamma / l_d^3.
double position_penalty(std::size_t first_occurrence, std::size_t doc_length, double gamma);

/// Consecutive slices of at most `segment_length` tokens; the last may be short.
std::vector<std::span<const std::string>> segment_document(std::span<const std::string> tokens,
                                                           std::size_t segment_length);

struct PromptBundle {
  std::vector<std::string> tokens;
  std::size_t phrase_start = 0;  // h
  std::size_t phrase_len = 0;    // l_k
  std::size_t length() const { return tokens.size(); }  // l_P
};

PromptBundle build_prompt(const SkpConfig& cfg, const CandidatePhrase& phrase);
PromptBundle build_prompt(const SkpConfig& cfg, std::string_view phrase_surface);

/// (1 / l_P^alpha) * sum of the phrase tokens' log-probabilities given the segment.
double score_phrase_on_segment(LogProbScorer& scorer, std::span<const std::string> segment,
                               const PromptBundle& prompt, double alpha,
                               std::size_t segment_index = 0);

/// Normalization shared by single and batched scoring paths.
double normalize_phrase_logprob(std::span<const double> token_logprobs, std::size_t prompt_length,
                                double alpha);

/// Scores every candidate over every segment and sorts by score descending
/// (ties: smaller first occurrence, then surface).
std::vector<RankedKeyphrase> rank_keyphrases(std::span<const std::string> doc_tokens,
                                             std::span<const CandidatePhrase> candidates,
                                             const SkpConfig& cfg, LogProbScorer& scorer);

std::vector<RankedKeyphrase> select_top_n(std::span<const RankedKeyphrase> ranked,
                                          std::size_t top_n);

/// Sort order used by every ranker.
bool ranks_before(const RankedKeyphrase& a, const RankedKeyphrase& b);

struct CorpusStats {
  std::size_t num_docs = 0;
  std::unordered_map<std::string, std::size_t> document_frequency;

  static CorpusStats build(std::span<const std::vector<std::string>> docs);
  double idf(const std::string& token) const;
};

/// Statistical baseline: sum over phrase tokens of tf(token, doc) * ln(N / df).
std::vector<RankedKeyphrase> rank_tfidf_baseline(std::span<const std::string> doc_tokens,
                                                 std::span<const CandidatePhrase> candidates,
                                                 const CorpusStats& stats);

}  // namespace chulo
