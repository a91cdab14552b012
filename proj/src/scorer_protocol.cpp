#include "chulo/scorer_protocol.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <unordered_map>

#include "json.hpp"

namespace chulo {

using nlohmann::json;

std::string encode_request(std::int64_t rid, const ScoreRequest& request) {
  json j;
  j["rid"] = rid;
  j["segment"] = std::vector<std::string>(request.segment.begin(), request.segment.end());
  j["prompt"] = std::vector<std::string>(request.prompt.begin(), request.prompt.end());
  j["phrase_start"] = request.phrase_start;
  j["phrase_len"] = request.phrase_len;
  return j.dump();
}

WireRequest decode_request(const std::string& line) {
  try {
    const json j = json::parse(line);
    WireRequest r;
    r.rid = j.at("rid").get<std::int64_t>();
    r.segment = j.at("segment").get<std::vector<std::string>>();
    r.prompt = j.at("prompt").get<std::vector<std::string>>();
    r.phrase_start = j.at("phrase_start").get<std::size_t>();
    r.phrase_len = j.at("phrase_len").get<std::size_t>();
    if (r.phrase_start + r.phrase_len > r.prompt.size()) {
      throw ScorerError("phrase span exceeds prompt");
    }
    return r;
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed request: ") + e.what());
  }
}

std::string encode_response(const WireResponse& response) {
  json j;
  j["rid"] = response.rid;
  if (response.error) {
    j["error"] = *response.error;
  } else {
    j["token_logprobs"] = response.token_logprobs;
  }
  return j.dump();
}

WireResponse decode_response(const std::string& line) {
  try {
    const json j = json::parse(line);
    WireResponse r;
    r.rid = j.at("rid").get<std::int64_t>();
    if (j.contains("error")) {
      r.error = j.at("error").get<std::string>();
    } else {
      r.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
    }
    return r;
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed response: ") + e.what());
  }
}

WireResponse answer_request_line(const std::string& line, LogProbScorer& scorer) {
  WireRequest req;
  try {
    req = decode_request(line);
  } catch (const ScorerError& e) {
    return WireResponse{-1, {}, e.what()};
  }
  WireResponse resp;
  resp.rid = req.rid;
  try {
    resp.token_logprobs =
        scorer.token_logprobs({req.segment, req.prompt, req.phrase_start, req.phrase_len});
  } catch (const std::exception& e) {
    resp.error = e.what();
  }
  return resp;
}

// ---------------------------------------------------------------------------
// ExternalScorer

ExternalScorer::ExternalScorer(std::string command) : command_(std::move(command)) {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
    throw ScorerError("cannot create pipes for scorer process");
  }
  ::signal(SIGPIPE, SIG_IGN);
  pid_ = fork();
  if (pid_ < 0) throw ScorerError("cannot fork scorer process");
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFL, fcntl(to_child_, F_GETFL) | O_NONBLOCK);
}

ExternalScorer::~ExternalScorer() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

std::vector<double> ExternalScorer::token_logprobs(const ScoreRequest& request) {
  auto out = token_logprobs_batch(std::span<const ScoreRequest>(&request, 1));
  return std::move(out.front());
}

std::vector<std::vector<double>> ExternalScorer::token_logprobs_batch(
    std::span<const ScoreRequest> requests) {
  std::vector<std::vector<double>> answers(requests.size());
  std::vector<bool> answered(requests.size(), false);
  std::unordered_map<std::int64_t, std::size_t> index_of;

  std::string outgoing;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const std::int64_t rid = next_rid_++;
    index_of.emplace(rid, i);
    outgoing += encode_request(rid, requests[i]);
    outgoing.push_back('\n');
  }

  std::size_t written = 0;
  std::size_t remaining = requests.size();
  while (remaining > 0) {
    pollfd fds[2] = {{from_child_, POLLIN, 0}, {to_child_, POLLOUT, 0}};
    const nfds_t nfds = written < outgoing.size() ? 2 : 1;
    if (poll(fds, nfds, -1) < 0) {
      if (errno == EINTR) continue;
      throw ScorerError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = write(to_child_, outgoing.data() + written, outgoing.size() - written);
      if (n < 0 && errno != EAGAIN && errno != EINTR) {
        throw ScorerError("scorer process closed its input (" + command_ + ")");
      }
      if (n > 0) written += static_cast<std::size_t>(n);
    }
    if (!(fds[0].revents & (POLLIN | POLLHUP | POLLERR))) continue;

    char buf[65536];
    const ssize_t n = read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ScorerError("scorer process exited before answering (" + command_ + ")");
    read_buffer_.append(buf, static_cast<std::size_t>(n));

    std::size_t nl;
    while ((nl = read_buffer_.find('\n')) != std::string::npos) {
      const std::string line = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      if (line.empty()) continue;
      const WireResponse resp = decode_response(line);
      auto it = index_of.find(resp.rid);
      if (it == index_of.end()) {
        throw ScorerError("scorer replied with unknown rid " + std::to_string(resp.rid) +
                          (resp.error ? ": " + *resp.error : std::string()));
      }
      const std::size_t i = it->second;
      if (resp.error) throw ScorerError("scorer error: " + *resp.error, i);
      if (answered[i]) throw ScorerError("duplicate reply for rid " + std::to_string(resp.rid), i);
      if (resp.token_logprobs.size() != requests[i].phrase_len) {
        throw ScorerError("scorer returned wrong number of log-probabilities", i);
      }
      answers[i] = resp.token_logprobs;
      answered[i] = true;
      --remaining;
    }
  }
  return answers;
}

}  // namespace chulo
