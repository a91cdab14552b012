#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chulo/corpus.hpp"

namespace chulo::synthetic {

/// Generated split: JSON-lines text in the dataset schema plus the parsed
/// documents.
struct Split {
  std::string jsonl;
  std::vector<Document> docs;
};

struct Corpus {
  LabelSet labels;
  Split train;
  Split test;
};

struct DocCorpusOptions {
  std::size_t num_train = 500;
  std::size_t num_test = 100;
  std::size_t min_length = 80;
  std::size_t max_length = 250;
  std::size_t family_size = 5;     // phrases per class family, at most 10
  std::size_t topic_phrases = 5;   // family phrases used by one document
  std::size_t planted_every = 15;  // tokens per planted sentence
  std::uint64_t seed = 1;
};

/// Three-class documents. The class is fixed by the family of keyphrases
/// planted in the text; everything else is class-independent filler with
/// its own (rarely repeated) noun phrases.
Corpus doc_classification(const DocCorpusOptions& options);

struct TokenCorpusOptions {
  std::size_t num_train = 160;
  std::size_t num_test = 40;
  std::size_t min_length = 200;
  std::size_t max_length = 600;
  std::uint64_t seed = 1;
};

/// BIO-tagged documents with PER, LOC and ORG entities. Some entity words
/// also occur as ordinary words, so tags depend on context.
Corpus bio_tagging(const TokenCorpusOptions& options);

/// Writes train.jsonl, test.jsonl and labels.json into `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace chulo::synthetic
