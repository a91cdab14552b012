#pragma once

#include <vector>

#include "chulo/pos_tagger.hpp"

namespace chulo::detail {

struct LexiconBlock {
  PosTag tag;
  const char* words;
};

/// Later blocks override earlier ones for words listed twice.
const std::vector<LexiconBlock>& builtin_lexicon();

}  // namespace chulo::detail
