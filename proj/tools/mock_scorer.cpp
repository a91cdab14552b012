// Stand-in for an external scorer bridge. Answers wire-protocol requests from
// an n-gram model, holding requests until stdin goes idle and then replying
// in reverse order, so clients must match responses by rid.

#include <poll.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chulo/scorer.hpp"
#include "chulo/scorer_protocol.hpp"

namespace {

void write_all(const std::string& text) {
  std::size_t done = 0;
  while (done < text.size()) {
    const ssize_t n = ::write(STDOUT_FILENO, text.data() + done, text.size() - done);
    if (n <= 0) std::exit(1);
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"JSON-lines scorer bridge backed by an n-gram model"};
  std::string model_path;
  std::string types_path;
  std::string order = "reverse";
  std::string fail_word;
  int idle_ms = 20;
  auto* model_opt = app.add_option("--model", model_path, "saved n-gram model");
  app.add_option("--types", types_path, "JSON list of types for a uniform model")
      ->excludes(model_opt);
  app.add_option("--order", order, "reply order")->check(CLI::IsMember({"fifo", "reverse"}));
  app.add_option("--idle-ms", idle_ms, "idle time before flushing buffered replies");
  app.add_option("--fail-word", fail_word,
                 "answer with an error for requests whose segment contains this word");
  CLI11_PARSE(app, argc, argv);

  std::optional<chulo::NgramScorer> scorer;
  try {
    if (!model_path.empty()) {
      scorer = chulo::NgramScorer::load(model_path);
    } else if (!types_path.empty()) {
      std::ifstream in(types_path);
      const auto types = nlohmann::json::parse(in).get<std::vector<std::string>>();
      scorer = chulo::NgramScorer::uniform(types);
    } else {
      std::cerr << "one of --model or --types is required\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "mock scorer: " << e.what() << "\n";
    return 2;
  }

  std::vector<std::string> pending;
  auto flush = [&] {
    if (order == "reverse") std::reverse(pending.begin(), pending.end());
    std::string out;
    for (const auto& line : pending) {
      chulo::WireResponse resp;
      bool failed = false;
      if (!fail_word.empty()) {
        try {
          const auto req = chulo::decode_request(line);
          if (std::find(req.segment.begin(), req.segment.end(), fail_word) != req.segment.end()) {
            resp.rid = req.rid;
            resp.error = "refused segment";
            failed = true;
          }
        } catch (const chulo::ScorerError&) {
        }
      }
      if (!failed) resp = chulo::answer_request_line(line, *scorer);
      out += chulo::encode_response(resp);
      out += '\n';
    }
    pending.clear();
    write_all(out);
  };

  std::string buffer;
  char chunk[4096];
  bool eof = false;
  while (!eof) {
    pollfd pfd{STDIN_FILENO, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, pending.empty() ? -1 : idle_ms);
    if (ready < 0) return 1;
    if (ready == 0) {
      flush();
      continue;
    }
    const ssize_t n = ::read(STDIN_FILENO, chunk, sizeof chunk);
    if (n <= 0) {
      eof = true;
    } else {
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.find_first_not_of(" \t\r") != std::string::npos) pending.push_back(std::move(line));
    }
  }
  if (!buffer.empty()) pending.push_back(buffer);
  flush();
  return 0;
}
