#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "chulo/scorer.hpp"

namespace chulo {

// JSON-lines scorer wire format.
//   request:  {"rid": int, "segment": [str], "prompt": [str], "phrase_start": int, "phrase_len": int}
//   response: {"rid": int, "token_logprobs": [float]}
//   error:    {"rid": int, "error": str}

struct WireRequest {
  std::int64_t rid = 0;
  std::vector<std::string> segment;
  std::vector<std::string> prompt;
  std::size_t phrase_start = 0;
  std::size_t phrase_len = 0;
};

struct WireResponse {
  std::int64_t rid = 0;
  std::vector<double> token_logprobs;
  std::optional<std::string> error;
};

std::string encode_request(std::int64_t rid, const ScoreRequest& request);
/// Throws ScorerError when the line is not a well-formed request.
WireRequest decode_request(const std::string& line);
std::string encode_response(const WireResponse& response);
/// Throws ScorerError when the line is not a well-formed response.
WireResponse decode_response(const std::string& line);

/// Answers one request line. Malformed input yields an error response with rid -1.
WireResponse answer_request_line(const std::string& line, LogProbScorer& scorer);

/// Scorer backed by an external process speaking the wire format on stdio.
/// Requests in a batch are pipelined; responses may arrive in any order and
/// are matched by rid.
class ExternalScorer final : public LogProbScorer {
 public:
  explicit ExternalScorer(std::string command);
  ~ExternalScorer() override;
  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  std::vector<double> token_logprobs(const ScoreRequest& request) override;
  std::vector<std::vector<double>> token_logprobs_batch(
      std::span<const ScoreRequest> requests) override;

  const std::string& command() const { return command_; }

 private:
  std::string command_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string read_buffer_;
  std::int64_t next_rid_ = 0;
};

}  // namespace chulo
