#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chulo/candidates.hpp"
#include "chulo/corpus.hpp"

namespace chulo {

/// Fixed-size chunk grid. All grids are row-major m x n.
struct ChunkSequence {
  std::string doc_id;
  std::size_t chunk_size = 0;
  std::size_t num_chunks = 0;
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> keyphrase_flags;
  std::vector<std::uint8_t> pad_mask;  // 1 => real token

  std::size_t doc_length() const;
  std::span<const TokenId> chunk_tokens(std::size_t i) const {
    return std::span(token_ids).subspan(i * chunk_size, chunk_size);
  }
  std::span<const std::uint8_t> chunk_flags(std::size_t i) const {
    return std::span(keyphrase_flags).subspan(i * chunk_size, chunk_size);
  }
  std::span<const std::uint8_t> chunk_pad_mask(std::size_t i) const {
    return std::span(pad_mask).subspan(i * chunk_size, chunk_size);
  }
  /// Drops padding and returns the original token order.
  std::vector<TokenId> real_tokens() const;
};

struct WeightConfig {
  double keyphrase = 0.8;      // a
  double non_keyphrase = 0.1;  // b

  /// Requires a >= b > 0. The equal case is the averaging ablation.
  void validate() const;
};

struct ChunkEmbeddingMatrix {
  Eigen::MatrixXd rows;          // m x d
  std::vector<std::uint8_t> chunk_valid;
};

ChunkSequence chunk_document(const Document& doc, std::size_t chunk_size);
ChunkSequence chunk_tokens(std::span<const TokenId> ids, std::size_t chunk_size,
                           std::string doc_id = {});

/// Flags every token inside any occurrence span of the given phrases.
/// Throws DataError naming the phrase when a span falls outside the document.
void mark_keyphrase_tokens(ChunkSequence& cs, std::span<const CandidatePhrase> keyphrases);

/// Per-token pooling weights for one chunk: a or b on real tokens, 0 on PAD.
std::vector<double> token_weights(std::span<const std::uint8_t> flags,
                                  std::span<const std::uint8_t> pad_mask,
                                  const WeightConfig& weights);

/// Weighted mean of real-token embeddings; returns false (and a zero vector)
/// for an all-PAD chunk. `token_embeddings` is n x d, one row per chunk slot.
bool chunk_embedding(std::span<const std::uint8_t> flags, std::span<const std::uint8_t> pad_mask,
                     const Eigen::Ref<const Eigen::MatrixXd>& token_embeddings,
                     const WeightConfig& weights, Eigen::Ref<Eigen::VectorXd> out);

/// Looks token ids up in `embedding_table` (vocab x d) and pools every chunk.
ChunkEmbeddingMatrix embed_document(const ChunkSequence& cs,
                                    const Eigen::Ref<const Eigen::MatrixXd>& embedding_table,
                                    const WeightConfig& weights);

// chunks.bin record: "CHLO", u32 version, u32 m, u32 n, u32 d, then m*d f32
// row-major, then m chunk-valid bytes, m*n pad-mask bytes, m*n keyphrase-flag
// bytes. Everything little-endian; a file is a concatenation of records.
inline constexpr std::uint32_t kChunkFileVersion = 1;

struct ChunkRecord {
  std::uint32_t num_chunks = 0;
  std::uint32_t chunk_size = 0;
  std::uint32_t dim = 0;
  std::vector<float> embeddings;
  std::vector<std::uint8_t> chunk_valid;
  std::vector<std::uint8_t> pad_mask;
  std::vector<std::uint8_t> keyphrase_flags;
};

ChunkRecord make_chunk_record(const ChunkSequence& cs, const ChunkEmbeddingMatrix& emb);
void write_chunk_record(std::ostream& out, const ChunkRecord& record);
/// Returns false at clean end of stream; throws DataError on a corrupt record.
bool read_chunk_record(std::istream& in, ChunkRecord& record);

}  // namespace chulo
