#include "chulo/keyphrase.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "chulo/corpus.hpp"

namespace chulo {

namespace {
std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

constexpr std::string_view kCategorySlot = "{category}";
constexpr std::string_view kPhraseSlot = "{phrase}";
}  // namespace

void SkpConfig::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("skp.alpha must be >= 0");
  if (gamma < 0.0) throw std::invalid_argument("skp.gamma must be >= 0");
  if (segment_length < 1) throw std::invalid_argument("skp.segment_length must be >= 1");
  if (top_n < 1) throw std::invalid_argument("skp.top_n must be >= 1");
  if (count_occurrences(prompt_template, kCategorySlot) != 1 ||
      count_occurrences(prompt_template, kPhraseSlot) != 1) {
    throw std::invalid_argument(
        "skp.prompt_template must contain {category} and {phrase} exactly once");
  }
}

double position_penalty(std::size_t first_occurrence, std::size_t doc_length, double gamma) {
  if (doc_length == 0) throw std::invalid_argument("position_penalty: document length is 0");
  if (first_occurrence >= doc_length) {
    throw std::invalid_argument("position_penalty: first occurrence outside document");
  }
  const double ld = static_cast<double>(doc_length);
  return static_cast<double>(first_occurrence) / ld + gamma / (ld * ld * ld);
}

std::vector<std::span<const std::string>> segment_document(std::span<const std::string> tokens,
                                                           std::size_t segment_length) {
  if (segment_length == 0) throw std::invalid_argument("segment_length must be >= 1");
  std::vector<std::span<const std::string>> out;
  for (std::size_t i = 0; i < tokens.size(); i += segment_length) {
    out.push_back(tokens.subspan(i, std::min(segment_length, tokens.size() - i)));
  }
  return out;
}

PromptBundle build_prompt(const SkpConfig& cfg, std::string_view phrase_surface) {
  const std::string& tpl = cfg.prompt_template;
  const auto phrase_at = tpl.find(kPhraseSlot);
  if (phrase_at == std::string::npos) throw std::invalid_argument("template lacks {phrase}");
  auto fill_category = [&](std::string part) {
    if (auto at = part.find(kCategorySlot); at != std::string::npos) {
      part.replace(at, kCategorySlot.size(), cfg.category);
    }
    return part;
  };
  const auto prefix = tokenize(fill_category(tpl.substr(0, phrase_at)));
  const auto phrase = tokenize(phrase_surface);
  const auto suffix = tokenize(fill_category(tpl.substr(phrase_at + kPhraseSlot.size())));
  if (phrase.empty()) throw std::invalid_argument("phrase tokenizes to zero tokens");

  PromptBundle bundle;
  bundle.phrase_start = prefix.size();
  bundle.phrase_len = phrase.size();
  bundle.tokens = prefix;
  bundle.tokens.insert(bundle.tokens.end(), phrase.begin(), phrase.end());
  bundle.tokens.insert(bundle.tokens.end(), suffix.begin(), suffix.end());
  return bundle;
}

PromptBundle build_prompt(const SkpConfig& cfg, const CandidatePhrase& phrase) {
  return build_prompt(cfg, phrase.surface);
}

double normalize_phrase_logprob(std::span<const double> token_logprobs, std::size_t prompt_length,
                                double alpha) {
  double sum = 0.0;
  for (double lp : token_logprobs) sum += lp;
  return sum / std::pow(static_cast<double>(prompt_length), alpha);
}

double score_phrase_on_segment(LogProbScorer& scorer, std::span<const std::string> segment,
                               const PromptBundle& prompt, double alpha,
                               std::size_t segment_index) {
  if (prompt.phrase_start + prompt.phrase_len > prompt.length()) {
    throw std::invalid_argument("phrase span exceeds prompt");
  }
  ScoreRequest req{segment, prompt.tokens, prompt.phrase_start, prompt.phrase_len};
  std::vector<double> lps;
  try {
    lps = scorer.token_logprobs(req);
  } catch (const std::exception& e) {
    throw ScorerError("segment " + std::to_string(segment_index) + ": " + e.what());
  }
  if (lps.size() != prompt.phrase_len) {
    throw ScorerError("segment " + std::to_string(segment_index) +
                      ": scorer returned wrong number of log-probabilities");
  }
  return normalize_phrase_logprob(lps, prompt.length(), alpha);
}

bool ranks_before(const RankedKeyphrase& a, const RankedKeyphrase& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.phrase.first_occurrence != b.phrase.first_occurrence) {
    return a.phrase.first_occurrence < b.phrase.first_occurrence;
  }
  return a.phrase.surface < b.phrase.surface;
}

std::vector<RankedKeyphrase> rank_keyphrases(std::span<const std::string> doc_tokens,
                                             std::span<const CandidatePhrase> candidates,
                                             const SkpConfig& cfg, LogProbScorer& scorer) {
  if (candidates.empty()) return {};
  if (cfg.segment_length > scorer.max_segment_length()) {
    throw std::invalid_argument("skp.segment_length exceeds what the scorer accepts");
  }
  const auto segments = segment_document(doc_tokens, cfg.segment_length);

  std::vector<RankedKeyphrase> ranked(candidates.size());
  std::vector<PromptBundle> prompts;
  prompts.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    ranked[i].phrase = candidates[i];
    ranked[i].position_penalty =
        position_penalty(candidates[i].first_occurrence, doc_tokens.size(), cfg.gamma);
    ranked[i].segment_scores.reserve(segments.size());
    prompts.push_back(build_prompt(cfg, candidates[i]));
  }

  std::vector<ScoreRequest> batch(candidates.size());
  for (std::size_t j = 0; j < segments.size(); ++j) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      batch[i] = {segments[j], prompts[i].tokens, prompts[i].phrase_start, prompts[i].phrase_len};
    }
    std::vector<std::vector<double>> answers;
    try {
      answers = scorer.token_logprobs_batch(batch);
    } catch (const ScorerError& e) {
      std::string where = "segment " + std::to_string(j);
      if (auto i = e.request_index(); i && *i < candidates.size()) {
        where = "phrase '" + candidates[*i].surface + "', " + where;
      }
      throw ScorerError("scoring failed for " + where + ": " + e.what(), e.request_index());
    } catch (const std::exception& e) {
      throw ScorerError("scoring failed for segment " + std::to_string(j) + ": " + e.what());
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (answers.at(i).size() != prompts[i].phrase_len) {
        throw ScorerError("phrase '" + candidates[i].surface + "', segment " + std::to_string(j) +
                          ": scorer returned wrong number of log-probabilities");
      }
      ranked[i].segment_scores.push_back(
          normalize_phrase_logprob(answers[i], prompts[i].length(), cfg.alpha));
    }
  }

  for (auto& r : ranked) {
    double total = 0.0;
    for (double p : r.segment_scores) total += p;  // fixed order: by segment index
    r.logprob_sum = total;
    r.score = r.position_penalty * total;
  }
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
  return ranked;
}

std::vector<RankedKeyphrase> select_top_n(std::span<const RankedKeyphrase> ranked,
                                          std::size_t top_n) {
  if (top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  const std::size_t k = std::min(top_n, ranked.size());
  return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k)};
}

CorpusStats CorpusStats::build(std::span<const std::vector<std::string>> docs) {
  CorpusStats stats;
  stats.num_docs = docs.size();
  for (const auto& doc : docs) {
    std::unordered_set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++stats.document_frequency[t];
  }
  return stats;
}

double CorpusStats::idf(const std::string& token) const {
  auto it = document_frequency.find(token);
  const double df = it == document_frequency.end() ? 1.0 : static_cast<double>(it->second);
  const double n = std::max<double>(static_cast<double>(num_docs), df);
  return std::log(n / df);
}

std::vector<RankedKeyphrase> rank_tfidf_baseline(std::span<const std::string> doc_tokens,
                                                 std::span<const CandidatePhrase> candidates,
                                                 const CorpusStats& stats) {
  std::unordered_map<std::string, std::size_t> tf;
  for (const auto& t : doc_tokens) ++tf[t];
  std::vector<RankedKeyphrase> ranked;
  ranked.reserve(candidates.size());
  for (const auto& c : candidates) {
    RankedKeyphrase r;
    r.phrase = c;
    double score = 0.0;
    const Span first = c.all_occurrences.empty()
                           ? Span{c.first_occurrence, c.first_occurrence + c.token_span_length - 1}
                           : c.all_occurrences.front();
    for (std::size_t k = first.start; k <= first.end && k < doc_tokens.size(); ++k) {
      const std::string& tok = doc_tokens[k];
      auto it = tf.find(tok);
      const double count = it == tf.end() ? 0.0 : static_cast<double>(it->second);
      score += count * stats.idf(tok);
    }
    r.score = score;
    ranked.push_back(std::move(r));
  }
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
  return ranked;
}

}  // namespace chulo
