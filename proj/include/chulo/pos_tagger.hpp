#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chulo/corpus.hpp"

namespace chulo {

/// Coarse tagset. Only the noun and JJ classes matter to candidate extraction;
/// everything else is kept coarse on purpose.
enum class PosTag : std::uint8_t { NN, NNS, NNP, NNPS, JJ, VB, RB, CD, PUNCT, OTHER };

std::string_view pos_tag_name(PosTag tag);
std::optional<PosTag> parse_pos_tag(std::string_view name);
/// Maps Penn-style tags (DT, VBZ, JJR, ...) onto the coarse tagset.
PosTag coarse_pos_tag(std::string_view penn);

inline bool is_noun(PosTag t) {
  return t == PosTag::NN || t == PosTag::NNS || t == PosTag::NNP || t == PosTag::NNPS;
}

/// Tagger plug-in interface. Implementations must be safe for concurrent
/// read-only use.
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual std::vector<PosTag> tag(std::span<const std::string> tokens) const = 0;
};

/// Lexicon lookup with suffix-rule fallback and a noun default.
class LexiconTagger final : public Tagger {
 public:
  /// Starts from the built-in English lexicon.
  LexiconTagger();

  /// Adds or overrides entries from a "word<TAB>tag" file.
  void load_tsv(const std::filesystem::path& path);
  void add(std::string word, PosTag tag);
  std::optional<PosTag> lookup(std::string_view word) const;
  std::size_t lexicon_size() const { return lexicon_.size(); }

  PosTag tag_word(std::string_view word) const;
  std::vector<PosTag> tag(std::span<const std::string> tokens) const override;

 private:
  std::unordered_map<std::string, PosTag> lexicon_;
};

struct PosTaggedDocument {
  std::vector<std::string> tokens;
  std::vector<PosTag> tags;
};

/// Throws DataError("empty document") for an empty token sequence.
PosTaggedDocument pos_tag(const Document& doc, const Tagger& tagger);
PosTaggedDocument pos_tag(std::vector<std::string> tokens, const Tagger& tagger);

const LexiconTagger& default_tagger();

}  // namespace chulo
