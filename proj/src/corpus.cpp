#include "chulo/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace chulo {

using nlohmann::json;

TaskMode parse_task_mode(std::string_view name) {
  if (name == "doc-single") return TaskMode::kDocSingle;
  if (name == "doc-multi") return TaskMode::kDocMulti;
  if (name == "token") return TaskMode::kToken;
  throw std::invalid_argument("unknown task mode: " + std::string(name));
}

std::string_view task_mode_name(TaskMode mode) {
  switch (mode) {
    case TaskMode::kDocSingle: return "doc-single";
    case TaskMode::kDocMulti: return "doc-multi";
    case TaskMode::kToken: return "token";
  }
  return "?";
}

std::vector<std::string> Document::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

std::vector<TokenId> Document::ids() const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.id);
  return out;
}

namespace {

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and are treated as letters.
bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
bool is_connector(unsigned char c) { return c == '-' || c == '\'' || c == '.'; }

// Length of a leading "x.y." style abbreviation (at least two letter-period pairs).
std::size_t abbreviation_prefix(std::string_view piece) {
  std::size_t i = 0;
  int pairs = 0;
  while (i + 1 < piece.size() && std::isalpha(static_cast<unsigned char>(piece[i])) &&
         piece[i + 1] == '.') {
    i += 2;
    ++pairs;
  }
  if (pairs < 2) return 0;
  // "u.s.a" would leave a dangling letter glued to the abbreviation.
  if (i < piece.size() && is_word_char(static_cast<unsigned char>(piece[i]))) return 0;
  return i;
}

void split_piece(std::string_view piece, std::vector<std::string>& out) {
  if (std::size_t abbrev = abbreviation_prefix(piece); abbrev > 0) {
    out.emplace_back(piece.substr(0, abbrev));
    piece.remove_prefix(abbrev);
  }
  std::string current;
  for (std::size_t i = 0; i < piece.size(); ++i) {
    const auto c = static_cast<unsigned char>(piece[i]);
    if (is_word_char(c)) {
      current.push_back(static_cast<char>(c));
      continue;
    }
    const bool internal = is_connector(c) && !current.empty() && i + 1 < piece.size() &&
                          is_word_char(static_cast<unsigned char>(piece[i + 1]));
    if (internal) {
      current.push_back(static_cast<char>(c));
      continue;
    }
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
    out.emplace_back(1, static_cast<char>(c));
  }
  if (!current.empty()) out.push_back(std::move(current));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::string lowered(text);
  for (auto& ch : lowered) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) ch = static_cast<char>(std::tolower(c));
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::string_view view(lowered);
  while (i < view.size()) {
    while (i < view.size() && is_space(static_cast<unsigned char>(view[i]))) ++i;
    std::size_t j = i;
    while (j < view.size() && !is_space(static_cast<unsigned char>(view[j]))) ++j;
    if (j > i) split_piece(view.substr(i, j - i), out);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  tokens_ = {std::string(kPadToken), std::string(kUnkToken)};
  index();
}

void Vocabulary::index() {
  ids_.clear();
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    ids_.emplace(tokens_[i], static_cast<TokenId>(i));
  }
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> texts,
                             int min_frequency) {
  if (min_frequency < 1) throw std::invalid_argument("min_frequency must be >= 1");
  std::unordered_map<std::string, std::int64_t> freq;
  for (const auto& text : texts) {
    for (const auto& tok : text) ++freq[tok];
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (auto& [tok, count] : freq) {
    if (count >= min_frequency && tok != kPadToken && tok != kUnkToken) {
      kept.emplace_back(tok, count);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  vocab.min_frequency_ = min_frequency;
  for (auto& [tok, count] : kept) vocab.tokens_.push_back(tok);
  vocab.index();
  return vocab;
}

Vocabulary build_vocab(std::span<const std::string> texts, int min_frequency) {
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(texts.size());
  for (const auto& t : texts) tokenized.push_back(tokenize(t));
  return Vocabulary::build(tokenized, min_frequency);
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  return tokens_.at(static_cast<std::size_t>(id));
}

void Vocabulary::assign_ids(Document& doc) const {
  for (auto& t : doc.tokens) t.id = id(t.surface);
}

std::string Vocabulary::serialize() const {
  json j;
  j["min_frequency"] = min_frequency_;
  j["tokens"] = tokens_;
  return j.dump() + "\n";
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("vocabulary: ") + e.what());
  }
  Vocabulary vocab;
  vocab.min_frequency_ = j.at("min_frequency").get<int>();
  vocab.tokens_ = j.at("tokens").get<std::vector<std::string>>();
  if (vocab.tokens_.size() < 2 || vocab.tokens_[kPadId] != kPadToken ||
      vocab.tokens_[kUnkId] != kUnkToken) {
    throw DataError("vocabulary: reserved PAD/UNK entries missing");
  }
  vocab.index();
  if (vocab.ids_.size() != vocab.tokens_.size()) {
    throw DataError("vocabulary: duplicate tokens");
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

// ---------------------------------------------------------------------------
// LabelSet

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!lookup_.emplace(names_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate label name: " + names_[i]);
    }
    if (names_[i] == "O") outside_ = static_cast<int>(i);
  }
}

LabelSet LabelSet::parse(std::string_view json_text) {
  try {
    return LabelSet(json::parse(json_text).get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError(std::string("label set: ") + e.what());
  }
}

LabelSet LabelSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read label set " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string LabelSet::to_json() const { return json(names_).dump(); }

std::optional<int> LabelSet::find(std::string_view name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

int LabelSet::index(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw DataError("unknown label: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Dataset loading

namespace {

Document parse_record(const json& rec, TaskMode schema, const LabelSet& labels) {
  Document doc;
  doc.id = rec.at("id").get<std::string>();
  if (schema == TaskMode::kToken) {
    const auto tokens = rec.at("tokens").get<std::vector<std::string>>();
    const auto tags = rec.at("tags").get<std::vector<std::string>>();
    if (tokens.size() != tags.size()) {
      throw DataError("length mismatch, record " + doc.id);
    }
    std::vector<int> tag_ids;
    tag_ids.reserve(tags.size());
    for (const auto& t : tags) tag_ids.push_back(labels.index(t));
    for (const auto& t : tokens) {
      // Token-schema surfaces are case-folded the same way tokenize() folds text.
      std::string s = t;
      for (auto& ch : s) {
        if (static_cast<unsigned char>(ch) < 0x80) ch = static_cast<char>(std::tolower(ch));
      }
      doc.tokens.push_back({std::move(s), kUnkId});
    }
    doc.token_tags = std::move(tag_ids);
    return doc;
  }
  for (auto& s : tokenize(rec.at("text").get<std::string>())) {
    doc.tokens.push_back({std::move(s), kUnkId});
  }
  if (schema == TaskMode::kDocSingle) {
    doc.doc_label = labels.index(rec.at("label").get<std::string>());
  } else {
    std::vector<int> ids;
    for (const auto& name : rec.at("labels").get<std::vector<std::string>>()) {
      ids.push_back(labels.index(name));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    doc.doc_labels = std::move(ids);
  }
  return doc;
}

template <class F>
std::vector<Document> parse_lines(std::string_view jsonl, F&& parse) {
  std::vector<Document> docs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("malformed JSON on line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      docs.push_back(parse(rec));
    } catch (const json::exception& e) {
      throw DataError("bad record on line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<Document> parse_dataset(std::string_view jsonl, TaskMode schema,
                                    const LabelSet& labels) {
  return parse_lines(jsonl, [&](const json& rec) { return parse_record(rec, schema, labels); });
}

std::vector<Document> load_dataset(const std::filesystem::path& path, TaskMode schema,
                                   const LabelSet& labels) {
  return parse_dataset(read_file(path), schema, labels);
}

std::vector<Document> parse_unlabeled(std::string_view jsonl) {
  return parse_lines(jsonl, [](const json& rec) {
    Document doc;
    doc.id = rec.at("id").get<std::string>();
    if (rec.contains("tokens")) {
      for (auto s : rec.at("tokens").get<std::vector<std::string>>()) {
        for (auto& ch : s) {
          if (static_cast<unsigned char>(ch) < 0x80) ch = static_cast<char>(std::tolower(ch));
        }
        doc.tokens.push_back({std::move(s), kUnkId});
      }
    } else {
      for (auto& s : tokenize(rec.at("text").get<std::string>())) {
        doc.tokens.push_back({std::move(s), kUnkId});
      }
    }
    return doc;
  });
}

std::vector<Document> load_unlabeled(const std::filesystem::path& path) {
  return parse_unlabeled(read_file(path));
}

BucketSelection bucket_filter(std::span<const Document> docs, std::size_t min_length_exclusive) {
  BucketSelection sel;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].length() > min_length_exclusive) sel.indices.push_back(i);
  }
  return sel;
}

}  // namespace chulo
