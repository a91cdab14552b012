#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "chulo/corpus.hpp"
#include "chulo/scorer.hpp"
#include "json.hpp"

namespace chulo {

std::vector<std::vector<double>> LogProbScorer::token_logprobs_batch(
    std::span<const ScoreRequest> requests) {
  std::vector<std::vector<double>> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(token_logprobs(r));
  return out;
}

namespace {
std::uint64_t bigram_key(std::size_t prev, std::size_t w) {
  return (static_cast<std::uint64_t>(prev) << 32) | static_cast<std::uint64_t>(w);
}
}  // namespace

NgramScorer::NgramScorer(NgramWeights weights) : weights_(weights) {
  const double sum = weights.bigram + weights.unigram + weights.segment;
  if (weights.bigram < 0 || weights.unigram < 0 || weights.segment < 0 ||
      std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("n-gram interpolation weights must be >= 0 and sum to 1");
  }
  add_type(std::string(kUnknown));
}

std::size_t NgramScorer::add_type(const std::string& w) {
  auto [it, inserted] = type_ids_.emplace(w, types_.size());
  if (inserted) {
    types_.push_back(w);
    unigram_.push_back(0);
    context_.push_back(0);
  }
  return it->second;
}

NgramScorer NgramScorer::uniform(std::span<const std::string> types, NgramWeights weights) {
  NgramScorer s(weights);
  for (const auto& t : types) s.add_type(t);
  return s;
}

NgramScorer NgramScorer::train(std::span<const std::vector<std::string>> docs,
                               std::span<const std::string> extra_types, NgramWeights weights) {
  NgramScorer s(weights);
  for (const auto& doc : docs) {
    std::size_t prev = 0;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const std::size_t id = s.add_type(doc[i]);
      ++s.unigram_[id];
      ++s.total_;
      if (i > 0) {
        ++s.bigram_[bigram_key(prev, id)];
        ++s.context_[prev];
      }
      prev = id;
    }
  }
  for (const auto& t : extra_types) s.add_type(t);
  return s;
}

std::size_t NgramScorer::type_id(std::string_view w) const {
  auto it = type_ids_.find(std::string(w));
  return it == type_ids_.end() ? 0 : it->second;
}

std::size_t NgramScorer::unigram_count(std::string_view w) const {
  auto it = type_ids_.find(std::string(w));
  return it == type_ids_.end() ? 0 : unigram_[it->second];
}

std::size_t NgramScorer::context_count(std::string_view prev) const {
  auto it = type_ids_.find(std::string(prev));
  return it == type_ids_.end() ? 0 : context_[it->second];
}

std::size_t NgramScorer::bigram_count(std::string_view prev, std::string_view w) const {
  auto p = type_ids_.find(std::string(prev));
  auto c = type_ids_.find(std::string(w));
  if (p == type_ids_.end() || c == type_ids_.end()) return 0;
  auto it = bigram_.find(bigram_key(p->second, c->second));
  return it == bigram_.end() ? 0 : it->second;
}

std::unordered_map<std::size_t, std::size_t> NgramScorer::count_segment(
    std::span<const std::string> segment) const {
  std::unordered_map<std::size_t, std::size_t> counts;
  for (const auto& w : segment) ++counts[type_id(w)];
  return counts;
}

double NgramScorer::log_prob(std::string_view word, std::string_view prev,
                             const std::unordered_map<std::size_t, std::size_t>& segment_counts,
                             std::size_t segment_size) const {
  const double V = static_cast<double>(types_.size());
  const std::size_t w = type_id(word);

  double p_bi = 1.0 / V;
  if (!prev.empty()) {
    const std::size_t c = type_id(prev);
    auto it = bigram_.find(bigram_key(c, w));
    const double joint = it == bigram_.end() ? 0.0 : static_cast<double>(it->second);
    p_bi = (joint + 1.0) / (static_cast<double>(context_[c]) + V);
  }
  const double p_uni =
      (static_cast<double>(unigram_[w]) + 1.0) / (static_cast<double>(total_) + V);
  auto seg = segment_counts.find(w);
  const double seg_count = seg == segment_counts.end() ? 0.0 : static_cast<double>(seg->second);
  const double p_seg = (seg_count + 1.0) / (static_cast<double>(segment_size) + V);

  return std::log(weights_.bigram * p_bi + weights_.unigram * p_uni + weights_.segment * p_seg);
}

std::vector<double> NgramScorer::score_with_counts(
    const ScoreRequest& request,
    const std::unordered_map<std::size_t, std::size_t>& segment_counts) const {
  if (request.phrase_start + request.phrase_len > request.prompt.size()) {
    throw ScorerError("phrase span exceeds prompt length");
  }
  std::vector<double> out;
  out.reserve(request.phrase_len);
  for (std::size_t g = request.phrase_start; g < request.phrase_start + request.phrase_len; ++g) {
    const std::string_view prev = g == 0 ? std::string_view{} : request.prompt[g - 1];
    out.push_back(log_prob(request.prompt[g], prev, segment_counts, request.segment.size()));
  }
  return out;
}

std::vector<double> NgramScorer::token_logprobs(const ScoreRequest& request) {
  return score_with_counts(request, count_segment(request.segment));
}

std::vector<std::vector<double>> NgramScorer::token_logprobs_batch(
    std::span<const ScoreRequest> requests) {
  std::vector<std::vector<double>> out;
  out.reserve(requests.size());
  // Segment statistics are shared by consecutive requests over the same slice.
  const std::string* cached_data = nullptr;
  std::size_t cached_size = 0;
  std::unordered_map<std::size_t, std::size_t> counts;
  for (const auto& r : requests) {
    if (r.segment.data() != cached_data || r.segment.size() != cached_size ||
        cached_data == nullptr) {
      counts = count_segment(r.segment);
      cached_data = r.segment.data();
      cached_size = r.segment.size();
    }
    out.push_back(score_with_counts(r, counts));
  }
  return out;
}

void NgramScorer::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "chulo-ngram";
  j["version"] = 1;
  j["weights"] = {weights_.bigram, weights_.unigram, weights_.segment};
  j["types"] = types_;
  j["unigram"] = unigram_;
  j["context"] = context_;
  j["total"] = total_;
  std::vector<std::array<std::uint64_t, 3>> bigrams;
  bigrams.reserve(bigram_.size());
  for (const auto& [key, count] : bigram_) bigrams.push_back({key >> 32, key & 0xffffffffu, count});
  std::sort(bigrams.begin(), bigrams.end());
  j["bigrams"] = bigrams;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << "\n";
}

NgramScorer NgramScorer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read n-gram model " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("n-gram model: ") + e.what());
  }
  if (j.value("format", "") != "chulo-ngram") throw DataError("not an n-gram model file");
  const auto w = j.at("weights").get<std::vector<double>>();
  NgramScorer s(NgramWeights{w.at(0), w.at(1), w.at(2)});
  s.types_.clear();
  s.type_ids_.clear();
  s.unigram_.clear();
  s.context_.clear();
  for (const auto& t : j.at("types").get<std::vector<std::string>>()) s.add_type(t);
  s.unigram_ = j.at("unigram").get<std::vector<std::size_t>>();
  s.context_ = j.at("context").get<std::vector<std::size_t>>();
  s.total_ = j.at("total").get<std::size_t>();
  if (s.unigram_.size() != s.types_.size() || s.context_.size() != s.types_.size()) {
    throw DataError("n-gram model: count tables do not match type inventory");
  }
  for (const auto& b : j.at("bigrams").get<std::vector<std::array<std::uint64_t, 3>>>()) {
    s.bigram_[bigram_key(b[0], b[1])] = b[2];
  }
  return s;
}

}  // namespace chulo
