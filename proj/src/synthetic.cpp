#include "chulo/synthetic.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <string_view>

#include <json.hpp>

namespace chulo::synthetic {

namespace {

using Words = std::vector<std::string_view>;

const Words kDeterminers = {"the", "a", "this", "that", "every", "some"};
const Words kVerbs = {"said", "made", "found", "showed", "discussed", "described",
                      "reported", "supported", "raised", "reached", "followed", "examined",
                      "presented", "noted", "mentioned", "considered", "included", "changed"};
const Words kAdverbs = {"also", "often", "recently", "still", "quite", "largely", "later", "soon"};
const Words kPrepositions = {"of", "in", "on", "for", "with", "about", "near", "after", "before"};
const Words kNeutralNouns = {
    "people", "time", "year", "report", "city", "group", "day", "week", "story", "office",
    "house", "road", "plan", "idea", "room", "family", "morning", "meeting", "question",
    "number", "point", "letter", "window", "table", "garden", "bridge", "river", "street",
    "corner", "picture", "friend", "student", "teacher", "neighbor", "visitor", "door",
    "kitchen", "bottle", "journey", "weekend", "evening", "answer", "reason", "detail",
    "change", "moment", "minute", "hour", "month", "member", "message", "paper", "book",
    "chair", "village", "town", "country", "summer", "winter", "photo"};
const Words kPronouns = {"it", "they", "we", "he", "she", "someone"};
const Words kNeutralAdjectives = {"old", "new", "local", "small", "large", "recent",
                                  "common", "simple", "final", "public", "whole", "main"};

// Keyphrase families; family index is the class.
const std::array<Words, 3> kFamilies = {
    Words{"solar panel", "wind turbine", "nuclear reactor", "carbon emission", "power grid",
          "electric battery", "fuel cost", "climate policy", "energy market", "coal plant"},
    Words{"federal court", "legal contract", "prison officer", "trial judge", "crime evidence",
          "police detective", "court verdict", "defense lawyer", "criminal case", "appeal judge"},
    Words{"football match", "tennis coach", "soccer league", "basketball team", "baseball score",
          "athletic player", "goal record", "league season", "hockey club", "marathon runner"},
};
const std::vector<std::string> kClassNames = {"energy", "law", "sports"};

std::string_view pick(const Words& words, std::mt19937_64& rng) {
  return words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
}

bool coin(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

void append(std::vector<std::string>& out, std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto space = text.find(' ', pos);
    const auto end = space == std::string_view::npos ? text.size() : space;
    out.emplace_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
}

void noun_phrase(std::vector<std::string>& out, std::mt19937_64& rng) {
  append(out, pick(kDeterminers, rng));
  append(out, pick(kNeutralAdjectives, rng));
  append(out, pick(kNeutralNouns, rng));
}

/// "subject (adv) verb det (adj) noun (prep det noun) ."; the subject is a
/// pronoun half of the time.
std::vector<std::string> filler_sentence(std::mt19937_64& rng) {
  std::vector<std::string> s;
  if (coin(rng, 0.5)) {
    append(s, pick(kPronouns, rng));
  } else {
    noun_phrase(s, rng);
  }
  if (coin(rng, 0.3)) append(s, pick(kAdverbs, rng));
  append(s, pick(kVerbs, rng));
  noun_phrase(s, rng);
  if (coin(rng, 0.3)) {
    append(s, pick(kPrepositions, rng));
    noun_phrase(s, rng);
  }
  s.emplace_back(".");
  return s;
}

std::vector<std::string> planted_sentence(std::string_view phrase, std::mt19937_64& rng) {
  std::vector<std::string> s;
  append(s, "the");
  append(s, phrase);
  append(s, pick(kVerbs, rng));
  noun_phrase(s, rng);
  s.emplace_back(".");
  return s;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Split doc_split(const std::string& prefix, std::size_t count, const DocCorpusOptions& o,
                std::mt19937_64& rng, const LabelSet& labels) {
  Split split;
  for (std::size_t d = 0; d < count; ++d) {
    const std::size_t label = d % kFamilies.size();
    const std::size_t target =
        std::uniform_int_distribution<std::size_t>(o.min_length, o.max_length)(rng);
    // The document repeats a few phrases of its family, about one planted
    // sentence per `planted_every` tokens.
    std::vector<std::string_view> topic(
        kFamilies[label].begin(),
        kFamilies[label].begin() + static_cast<std::ptrdiff_t>(o.family_size));
    std::shuffle(topic.begin(), topic.end(), rng);
    topic.resize(std::min(o.topic_phrases, topic.size()));
    const std::size_t planted = std::max<std::size_t>(1, target / o.planted_every);

    std::vector<std::vector<std::string>> sentences;
    std::size_t length = 0;
    while (length + 7 * planted < target) {
      sentences.push_back(filler_sentence(rng));
      length += sentences.back().size();
    }
    for (std::size_t p = 0; p < planted; ++p) {
      const auto slot = std::uniform_int_distribution<std::size_t>(0, sentences.size())(rng);
      sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(slot),
                       planted_sentence(pick(topic, rng), rng));
    }
    std::vector<std::string> tokens;
    for (const auto& s : sentences) tokens.insert(tokens.end(), s.begin(), s.end());
    if (tokens.size() > o.max_length) tokens.resize(o.max_length);

    nlohmann::json rec = {{"id", prefix + std::to_string(d)},
                          {"text", join(tokens)},
                          {"label", kClassNames[label]}};
    split.jsonl += rec.dump() + "\n";
  }
  split.docs = parse_dataset(split.jsonl, TaskMode::kDocSingle, labels);
  return split;
}

// Entity inventories. "new", "red", "cross" and "park" also appear as
// ordinary words in the filler.
const Words kFirstNames = {"john", "mary", "james", "anna", "peter", "laura", "david", "emma",
                           "omar", "lucia"};
const Words kLastNames = {"smith", "jones", "brown", "taylor", "wilson", "clark", "lewis",
                          "walker", "park", "young"};
const Words kLocations = {"paris", "london", "berlin", "tokyo", "new york", "cape town",
                          "rio grande", "lake placid", "new delhi", "oslo"};
const Words kOrganizations = {"acme corporation", "globex group", "initech labs",
                              "united nations", "red cross", "stark industries",
                              "umbrella company", "wayne foundation"};
const Words kTokenFiller = {"new", "red", "cross", "park", "young", "lake", "group", "company"};

enum Entity { kPer = 0, kLoc = 1, kOrg = 2 };

void append_entity(std::vector<std::string>& tokens, std::vector<std::string>& tags, Entity e,
                   std::mt19937_64& rng) {
  static const std::array<std::string_view, 3> kTypes = {"PER", "LOC", "ORG"};
  std::vector<std::string> words;
  if (e == kPer) {
    append(words, pick(kFirstNames, rng));
    if (coin(rng, 0.8)) append(words, pick(kLastNames, rng));
  } else if (e == kLoc) {
    append(words, pick(kLocations, rng));
  } else {
    append(words, pick(kOrganizations, rng));
  }
  for (std::size_t i = 0; i < words.size(); ++i) {
    tokens.push_back(words[i]);
    tags.push_back(std::string(i == 0 ? "B-" : "I-") + std::string(kTypes[e]));
  }
}

void append_plain(std::vector<std::string>& tokens, std::vector<std::string>& tags,
                  const std::vector<std::string>& words) {
  for (const auto& w : words) {
    tokens.push_back(w);
    tags.emplace_back("O");
  }
}

void entity_sentence(std::vector<std::string>& tokens, std::vector<std::string>& tags,
                     std::mt19937_64& rng) {
  const auto kind = std::uniform_int_distribution<int>(0, 5)(rng);
  switch (kind) {
    case 0:
      append_entity(tokens, tags, kPer, rng);
      append_plain(tokens, tags, {"visited"});
      append_entity(tokens, tags, kLoc, rng);
      break;
    case 1:
      append_entity(tokens, tags, kPer, rng);
      append_plain(tokens, tags, {"works", "for"});
      append_entity(tokens, tags, kOrg, rng);
      break;
    case 2:
      append_entity(tokens, tags, kOrg, rng);
      append_plain(tokens, tags, {"opened", "an", "office", "in"});
      append_entity(tokens, tags, kLoc, rng);
      break;
    case 3:
      append_plain(tokens, tags, {"the", "report", "from"});
      append_entity(tokens, tags, kLoc, rng);
      append_plain(tokens, tags, {"mentioned"});
      append_entity(tokens, tags, kPer, rng);
      break;
    case 4:
      append_plain(tokens, tags, {"a"});
      append_plain(tokens, tags, {std::string(pick(kTokenFiller, rng))});
      append_plain(tokens, tags, {std::string(pick(kNeutralNouns, rng)), "near"});
      append_entity(tokens, tags, kOrg, rng);
      break;
    default:
      append_entity(tokens, tags, kOrg, rng);
      append_plain(tokens, tags, {"hired"});
      append_entity(tokens, tags, kPer, rng);
      break;
  }
  append_plain(tokens, tags, {"."});
}

void token_filler_sentence(std::vector<std::string>& tokens, std::vector<std::string>& tags,
                           std::mt19937_64& rng) {
  auto s = filler_sentence(rng);
  if (coin(rng, 0.4)) s.insert(s.begin() + 1, std::string(pick(kTokenFiller, rng)));
  append_plain(tokens, tags, s);
}

Split token_split(const std::string& prefix, std::size_t count, const TokenCorpusOptions& o,
                  std::mt19937_64& rng, const LabelSet& labels) {
  Split split;
  for (std::size_t d = 0; d < count; ++d) {
    const std::size_t target =
        std::uniform_int_distribution<std::size_t>(o.min_length, o.max_length)(rng);
    std::vector<std::string> tokens, tags;
    while (true) {
      std::vector<std::string> t, g;
      if (coin(rng, 0.35)) {
        entity_sentence(t, g, rng);
      } else {
        token_filler_sentence(t, g, rng);
      }
      if (tokens.size() + t.size() > target) break;
      tokens.insert(tokens.end(), t.begin(), t.end());
      tags.insert(tags.end(), g.begin(), g.end());
    }
    // Pad with plain periods to hit the sampled length exactly.
    while (tokens.size() < target) {
      tokens.emplace_back(".");
      tags.emplace_back("O");
    }
    nlohmann::json rec = {{"id", prefix + std::to_string(d)}, {"tokens", tokens}, {"tags", tags}};
    split.jsonl += rec.dump() + "\n";
  }
  split.docs = parse_dataset(split.jsonl, TaskMode::kToken, labels);
  return split;
}

}  // namespace

Corpus doc_classification(const DocCorpusOptions& options) {
  if (options.min_length > options.max_length || options.topic_phrases < 1 ||
      options.planted_every < 1 || options.family_size < 1 ||
      options.family_size > kFamilies[0].size()) {
    throw std::invalid_argument("synthetic corpus: bad document options");
  }
  std::mt19937_64 rng(options.seed);
  Corpus c;
  c.labels = LabelSet(kClassNames);
  c.train = doc_split("train-", options.num_train, options, rng, c.labels);
  c.test = doc_split("test-", options.num_test, options, rng, c.labels);
  return c;
}

Corpus bio_tagging(const TokenCorpusOptions& options) {
  if (options.min_length > options.max_length || options.min_length < 20) {
    throw std::invalid_argument("synthetic corpus: bad length range");
  }
  std::mt19937_64 rng(options.seed);
  Corpus c;
  c.labels = LabelSet({"O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG"});
  c.train = token_split("train-", options.num_train, options, rng, c.labels);
  c.test = token_split("test-", options.num_test, options, rng, c.labels);
  return c;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  write("train.jsonl", corpus.train.jsonl);
  write("test.jsonl", corpus.test.jsonl);
  write("labels.json", corpus.labels.to_json() + "\n");
}

}  // namespace chulo::synthetic
