#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace chulo {

/// One conditional-likelihood query: score the prompt tokens
/// [phrase_start, phrase_start + phrase_len) given the segment and the prompt prefix.
struct ScoreRequest {
  std::span<const std::string> segment;
  std::span<const std::string> prompt;
  std::size_t phrase_start = 0;
  std::size_t phrase_len = 0;
};

class ScorerError : public std::runtime_error {
 public:
  explicit ScorerError(const std::string& what, std::optional<std::size_t> request_index = {})
      : std::runtime_error(what), request_index_(request_index) {}

  /// Position of the failing request inside a batch, when known.
  std::optional<std::size_t> request_index() const { return request_index_; }

 private:
  std::optional<std::size_t> request_index_;
};

/// Source of natural-log conditional token probabilities. Identical requests
/// must give bit-identical answers within one process configuration.
class LogProbScorer {
 public:
  virtual ~LogProbScorer() = default;

  virtual std::size_t max_segment_length() const {
    return std::numeric_limits<std::size_t>::max();
  }

  /// Returns phrase_len values, one per phrase token.
  virtual std::vector<double> token_logprobs(const ScoreRequest& request) = 0;

  /// Answers are returned in request order. Implementations may pipeline.
  virtual std::vector<std::vector<double>> token_logprobs_batch(
      std::span<const ScoreRequest> requests);
};

struct NgramWeights {
  double bigram = 0.4;
  double unigram = 0.2;
  double segment = 0.4;
};

/// Interpolated bigram model with add-one smoothing, conditioned on the
/// segment through a Laplace unigram over the segment's own tokens:
///
///   p(w | prev, seg) = l_bi * (c(prev,w)+1)/(c(prev.)+V)
///                    + l_uni * (c(w)+1)/(N+V)
///                    + l_seg * (c_seg(w)+1)/(|seg|+V)
///
/// Every component is a proper distribution over the V known types (one of
/// which is the unknown-word bucket), so the mixture emits true log-probabilities.
class NgramScorer final : public LogProbScorer {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  explicit NgramScorer(NgramWeights weights = {});

  /// Fixes the type inventory without any counts (uniform model).
  static NgramScorer uniform(std::span<const std::string> types, NgramWeights weights = {});

  /// Counts unigrams and within-document bigrams. Every type seen becomes part
  /// of the inventory; `extra_types` (e.g. prompt words) are added without counts.
  static NgramScorer train(std::span<const std::vector<std::string>> docs,
                           std::span<const std::string> extra_types = {},
                           NgramWeights weights = {});

  std::size_t vocabulary_size() const { return types_.size(); }
  const NgramWeights& weights() const { return weights_; }
  std::size_t type_id(std::string_view w) const;
  const std::vector<std::string>& types() const { return types_; }

  /// log p(word | prev, segment counts); prev may be empty for no context.
  double log_prob(std::string_view word, std::string_view prev,
                  const std::unordered_map<std::size_t, std::size_t>& segment_counts,
                  std::size_t segment_size) const;

  std::vector<double> token_logprobs(const ScoreRequest& request) override;
  std::vector<std::vector<double>> token_logprobs_batch(
      std::span<const ScoreRequest> requests) override;

  std::unordered_map<std::size_t, std::size_t> count_segment(
      std::span<const std::string> segment) const;

  // Raw counts, exposed for independent re-computation in tests.
  std::size_t unigram_count(std::string_view w) const;
  std::size_t bigram_count(std::string_view prev, std::string_view w) const;
  std::size_t context_count(std::string_view prev) const;
  std::size_t total_tokens() const { return total_; }

  void save(const std::filesystem::path& path) const;
  static NgramScorer load(const std::filesystem::path& path);

 private:
  std::size_t add_type(const std::string& w);
  std::vector<double> score_with_counts(
      const ScoreRequest& request,
      const std::unordered_map<std::size_t, std::size_t>& segment_counts) const;

  NgramWeights weights_;
  std::vector<std::string> types_;
  std::unordered_map<std::string, std::size_t> type_ids_;
  std::vector<std::size_t> unigram_;
  std::vector<std::size_t> context_;
  std::unordered_map<std::uint64_t, std::size_t> bigram_;
  std::size_t total_ = 0;
};

}  // namespace chulo
