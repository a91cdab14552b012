#include "chulo/pos_tagger.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "lexicon_data.hpp"

namespace chulo {

namespace {

constexpr std::array<std::string_view, 10> kTagNames = {
    "NN", "NNS", "NNP", "NNPS", "JJ", "VB", "RB", "CD", "PUNCT", "OTHER"};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_numeric(std::string_view w) {
  bool digit = false;
  for (char c : w) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c != '.' && c != ',' && c != '-') {
      return false;
    }
  }
  return digit;
}

bool is_punctuation(std::string_view w) {
  for (char c : w) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || u >= 0x80) return false;
  }
  return !w.empty();
}

struct SuffixRule {
  std::string_view suffix;
  PosTag tag;
};

// First match wins; only consulted for words missing from the lexicon.
constexpr std::array<SuffixRule, 27> kSuffixRules = {{
    {"ly", PosTag::RB},      {"ing", PosTag::VB},    {"ed", PosTag::VB},
    {"ize", PosTag::VB},     {"ise", PosTag::VB},    {"ous", PosTag::JJ},
    {"ful", PosTag::JJ},     {"ive", PosTag::JJ},    {"able", PosTag::JJ},
    {"ible", PosTag::JJ},    {"ical", PosTag::JJ},   {"al", PosTag::JJ},
    {"ic", PosTag::JJ},      {"less", PosTag::JJ},   {"ish", PosTag::JJ},
    {"ary", PosTag::JJ},     {"tion", PosTag::NN},   {"sion", PosTag::NN},
    {"ment", PosTag::NN},    {"ness", PosTag::NN},   {"ity", PosTag::NN},
    {"ism", PosTag::NN},     {"ist", PosTag::NN},    {"ship", PosTag::NN},
    {"ance", PosTag::NN},    {"ence", PosTag::NN},   {"er", PosTag::NN},
}};

}  // namespace

std::string_view pos_tag_name(PosTag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

std::optional<PosTag> parse_pos_tag(std::string_view name) {
  for (std::size_t i = 0; i < kTagNames.size(); ++i) {
    if (kTagNames[i] == name) return static_cast<PosTag>(i);
  }
  return std::nullopt;
}

PosTag coarse_pos_tag(std::string_view penn) {
  if (auto exact = parse_pos_tag(penn)) return *exact;
  if (penn.starts_with("VB") || penn == "MD") return PosTag::VB;
  if (penn.starts_with("RB")) return PosTag::RB;
  if (penn == "CD") return PosTag::CD;
  if (!penn.empty() && !std::isalpha(static_cast<unsigned char>(penn.front()))) {
    return PosTag::PUNCT;
  }
  // JJR/JJS fall here too: the candidate pattern admits plain JJ only.
  return PosTag::OTHER;
}

LexiconTagger::LexiconTagger() {
  for (const auto& block : detail::builtin_lexicon()) {
    std::istringstream words(block.words);
    std::string w;
    while (words >> w) lexicon_[w] = block.tag;
  }
}

void LexiconTagger::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read tagger lexicon " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": expected word<TAB>tag");
    }
    std::string word = line.substr(0, tab);
    std::string tag = line.substr(tab + 1);
    if (!tag.empty() && tag.back() == '\r') tag.pop_back();
    for (auto& ch : word) {
      if (static_cast<unsigned char>(ch) < 0x80) ch = static_cast<char>(std::tolower(ch));
    }
    lexicon_[word] = coarse_pos_tag(tag);
  }
}

void LexiconTagger::add(std::string word, PosTag tag) { lexicon_[std::move(word)] = tag; }

std::optional<PosTag> LexiconTagger::lookup(std::string_view word) const {
  auto it = lexicon_.find(std::string(word));
  if (it == lexicon_.end()) return std::nullopt;
  return it->second;
}

PosTag LexiconTagger::tag_word(std::string_view word) const {
  if (auto known = lookup(word)) return *known;
  if (is_numeric(word)) return PosTag::CD;
  if (is_punctuation(word)) return PosTag::PUNCT;

  // Plural of a known noun stem: dogs, boxes, cities.
  if (word.size() > 2 && word.back() == 's') {
    std::array<std::string, 3> stems = {std::string(word.substr(0, word.size() - 1)), "", ""};
    if (ends_with(word, "es")) stems[1] = std::string(word.substr(0, word.size() - 2));
    if (ends_with(word, "ies")) stems[2] = std::string(word.substr(0, word.size() - 3)) + "y";
    for (const auto& stem : stems) {
      if (stem.empty()) continue;
      if (auto t = lookup(stem)) {
        if (*t == PosTag::NN) return PosTag::NNS;
        if (*t == PosTag::NNP) return PosTag::NNPS;
      }
    }
  }
  for (const auto& rule : kSuffixRules) {
    if (ends_with(word, rule.suffix)) return rule.tag;
  }
  if (word.size() > 3 && word.back() == 's' && !ends_with(word, "ss") &&
      !ends_with(word, "us") && !ends_with(word, "is")) {
    return PosTag::NNS;
  }
  return PosTag::NN;
}

std::vector<PosTag> LexiconTagger::tag(std::span<const std::string> tokens) const {
  std::vector<PosTag> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) tags.push_back(tag_word(t));
  return tags;
}

PosTaggedDocument pos_tag(std::vector<std::string> tokens, const Tagger& tagger) {
  if (tokens.empty()) throw DataError("empty document");
  PosTaggedDocument out;
  out.tags = tagger.tag(tokens);
  if (out.tags.size() != tokens.size()) {
    throw std::logic_error("tagger returned a tag sequence of the wrong length");
  }
  out.tokens = std::move(tokens);
  return out;
}

PosTaggedDocument pos_tag(const Document& doc, const Tagger& tagger) {
  return pos_tag(doc.surfaces(), tagger);
}

const LexiconTagger& default_tagger() {
  static const LexiconTagger tagger;
  return tagger;
}

}  // namespace chulo
