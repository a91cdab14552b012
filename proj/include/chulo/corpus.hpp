#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chulo {

/// Raised for malformed or inconsistent input data (maps to CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;

struct Token {
  std::string surface;
  TokenId id = kUnkId;
};

enum class TaskMode { kDocSingle, kDocMulti, kToken };

TaskMode parse_task_mode(std::string_view name);
std::string_view task_mode_name(TaskMode mode);

struct Document {
  std::string id;
  std::vector<Token> tokens;
  std::optional<int> doc_label;
  std::optional<std::vector<int>> doc_labels;
  std::optional<std::vector<int>> token_tags;

  std::size_t length() const { return tokens.size(); }
  std::vector<std::string> surfaces() const;
  std::vector<TokenId> ids() const;
};

/// Lowercased word tokenizer. Punctuation becomes its own token; hyphens,
/// apostrophes and periods between word characters stay inside the word, and
/// letter-period abbreviations ("u.s.") are kept whole.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Builds from tokenized texts. Ids after PAD/UNK are ordered by descending
  /// frequency, ties broken lexicographically.
  static Vocabulary build(std::span<const std::vector<std::string>> texts,
                          int min_frequency = 2);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  int min_frequency() const { return min_frequency_; }

  void assign_ids(Document& doc) const;

  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.min_frequency_ == b.min_frequency_;
  }

 private:
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  int min_frequency_ = 1;
};

/// Convenience wrapper over Vocabulary::build for raw texts.
Vocabulary build_vocab(std::span<const std::string> texts, int min_frequency = 2);

class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);

  static LabelSet load(const std::filesystem::path& path);
  static LabelSet parse(std::string_view json_text);
  std::string to_json() const;

  std::optional<int> find(std::string_view name) const;
  /// Throws DataError naming the label when it is unknown.
  int index(std::string_view name) const;
  const std::string& name(int index) const { return names_.at(index); }
  std::size_t size() const { return names_.size(); }
  std::optional<int> outside_index() const { return outside_; }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const LabelSet& a, const LabelSet& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int, std::less<>> lookup_;
  std::optional<int> outside_;
};

/// Parses one JSON-lines dataset. Token ids are left as UNK; call
/// Vocabulary::assign_ids once a vocabulary exists.
std::vector<Document> parse_dataset(std::string_view jsonl, TaskMode schema,
                                    const LabelSet& labels);
std::vector<Document> load_dataset(const std::filesystem::path& path, TaskMode schema,
                                   const LabelSet& labels);

/// Reads ids and words only ("tokens" when present, else "text"), so any of
/// the dataset schemas is accepted and labels are ignored.
std::vector<Document> parse_unlabeled(std::string_view jsonl);
std::vector<Document> load_unlabeled(const std::filesystem::path& path);

struct BucketSelection {
  std::vector<std::size_t> indices;
  std::size_t count() const { return indices.size(); }
};

/// Documents strictly longer than the threshold, in input order.
BucketSelection bucket_filter(std::span<const Document> docs, std::size_t min_length_exclusive);

}  // namespace chulo
