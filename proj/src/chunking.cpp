#include "chulo/chunking.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace chulo {

std::size_t ChunkSequence::doc_length() const {
  return static_cast<std::size_t>(std::count(pad_mask.begin(), pad_mask.end(), 1));
}

std::vector<TokenId> ChunkSequence::real_tokens() const {
  std::vector<TokenId> out;
  out.reserve(token_ids.size());
  for (std::size_t k = 0; k < token_ids.size(); ++k) {
    if (pad_mask[k]) out.push_back(token_ids[k]);
  }
  return out;
}

void WeightConfig::validate() const {
  if (!(non_keyphrase > 0.0)) throw std::invalid_argument("weights: b must be > 0");
  if (!(keyphrase >= non_keyphrase)) throw std::invalid_argument("weights: need a >= b");
}

ChunkSequence chunk_tokens(std::span<const TokenId> ids, std::size_t chunk_size,
                           std::string doc_id) {
  if (chunk_size == 0) throw std::invalid_argument("chunk size must be >= 1");
  ChunkSequence cs;
  cs.doc_id = std::move(doc_id);
  cs.chunk_size = chunk_size;
  cs.num_chunks = (ids.size() + chunk_size - 1) / chunk_size;
  const std::size_t cells = cs.num_chunks * chunk_size;
  cs.token_ids.assign(cells, kPadId);
  cs.pad_mask.assign(cells, 0);
  cs.keyphrase_flags.assign(cells, 0);
  std::copy(ids.begin(), ids.end(), cs.token_ids.begin());
  std::fill_n(cs.pad_mask.begin(), ids.size(), std::uint8_t{1});
  return cs;
}

ChunkSequence chunk_document(const Document& doc, std::size_t chunk_size) {
  const auto ids = doc.ids();
  return chunk_tokens(ids, chunk_size, doc.id);
}

void mark_keyphrase_tokens(ChunkSequence& cs, std::span<const CandidatePhrase> keyphrases) {
  std::fill(cs.keyphrase_flags.begin(), cs.keyphrase_flags.end(), std::uint8_t{0});
  const std::size_t length = cs.doc_length();
  for (const auto& phrase : keyphrases) {
    for (const Span& span : phrase.all_occurrences) {
      if (span.start > span.end || span.end >= length) {
        throw DataError("keyphrase '" + phrase.surface + "' has a span outside the document");
      }
      // Real tokens occupy the leading cells, so document index == cell index.
      std::fill(cs.keyphrase_flags.begin() + static_cast<std::ptrdiff_t>(span.start),
                cs.keyphrase_flags.begin() + static_cast<std::ptrdiff_t>(span.end) + 1,
                std::uint8_t{1});
    }
  }
}

std::vector<double> token_weights(std::span<const std::uint8_t> flags,
                                  std::span<const std::uint8_t> pad_mask,
                                  const WeightConfig& weights) {
  std::vector<double> w(flags.size(), 0.0);
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (pad_mask[k]) w[k] = flags[k] ? weights.keyphrase : weights.non_keyphrase;
  }
  return w;
}

bool chunk_embedding(std::span<const std::uint8_t> flags, std::span<const std::uint8_t> pad_mask,
                     const Eigen::Ref<const Eigen::MatrixXd>& token_embeddings,
                     const WeightConfig& weights, Eigen::Ref<Eigen::VectorXd> out) {
  if (flags.size() != pad_mask.size() ||
      static_cast<std::size_t>(token_embeddings.rows()) != flags.size() ||
      token_embeddings.cols() != out.size()) {
    throw std::invalid_argument("chunk_embedding: dimension mismatch");
  }
  const auto w = token_weights(flags, pad_mask, weights);
  out.setZero();
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] == 0.0) continue;
    out.noalias() += w[k] * token_embeddings.row(static_cast<Eigen::Index>(k)).transpose();
    total += w[k];
  }
  if (total == 0.0) return false;
  out /= total;
  return true;
}

ChunkEmbeddingMatrix embed_document(const ChunkSequence& cs,
                                    const Eigen::Ref<const Eigen::MatrixXd>& embedding_table,
                                    const WeightConfig& weights) {
  const Eigen::Index d = embedding_table.cols();
  ChunkEmbeddingMatrix out;
  out.rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cs.num_chunks), d);
  out.chunk_valid.assign(cs.num_chunks, 0);
  Eigen::MatrixXd gathered(static_cast<Eigen::Index>(cs.chunk_size), d);
  Eigen::VectorXd pooled(d);
  for (std::size_t i = 0; i < cs.num_chunks; ++i) {
    const auto ids = cs.chunk_tokens(i);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] < 0 || ids[k] >= embedding_table.rows()) {
        throw std::out_of_range("token id " + std::to_string(ids[k]) +
                                " outside embedding table");
      }
      gathered.row(static_cast<Eigen::Index>(k)) = embedding_table.row(ids[k]);
    }
    out.chunk_valid[i] =
        chunk_embedding(cs.chunk_flags(i), cs.chunk_pad_mask(i), gathered, weights, pooled) ? 1 : 0;
    out.rows.row(static_cast<Eigen::Index>(i)) = pooled.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// chunks.bin

namespace {

static_assert(std::endian::native == std::endian::little,
              "chunk files are written with native little-endian layout");

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

template <typename T>
void read_exact(std::istream& in, std::vector<T>& buf, std::size_t count, const char* what) {
  buf.resize(count);
  if (count == 0) return;
  if (!in.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(count * sizeof(T)))) {
    throw DataError(std::string("chunk file truncated in ") + what);
  }
}

}  // namespace

ChunkRecord make_chunk_record(const ChunkSequence& cs, const ChunkEmbeddingMatrix& emb) {
  ChunkRecord r;
  r.num_chunks = static_cast<std::uint32_t>(cs.num_chunks);
  r.chunk_size = static_cast<std::uint32_t>(cs.chunk_size);
  r.dim = static_cast<std::uint32_t>(emb.rows.cols());
  r.embeddings.reserve(static_cast<std::size_t>(emb.rows.size()));
  for (Eigen::Index i = 0; i < emb.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < emb.rows.cols(); ++j) {
      r.embeddings.push_back(static_cast<float>(emb.rows(i, j)));
    }
  }
  r.chunk_valid = emb.chunk_valid;
  r.pad_mask = cs.pad_mask;
  r.keyphrase_flags = cs.keyphrase_flags;
  return r;
}

void write_chunk_record(std::ostream& out, const ChunkRecord& r) {
  out.write("CHLO", 4);
  put_u32(out, kChunkFileVersion);
  put_u32(out, r.num_chunks);
  put_u32(out, r.chunk_size);
  put_u32(out, r.dim);
  out.write(reinterpret_cast<const char*>(r.embeddings.data()),
            static_cast<std::streamsize>(r.embeddings.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(r.chunk_valid.data()),
            static_cast<std::streamsize>(r.chunk_valid.size()));
  out.write(reinterpret_cast<const char*>(r.pad_mask.data()),
            static_cast<std::streamsize>(r.pad_mask.size()));
  out.write(reinterpret_cast<const char*>(r.keyphrase_flags.data()),
            static_cast<std::streamsize>(r.keyphrase_flags.size()));
}

bool read_chunk_record(std::istream& in, ChunkRecord& r) {
  char magic[4];
  if (!in.read(magic, 4)) {
    if (in.gcount() == 0) return false;
    throw DataError("chunk file truncated in header");
  }
  if (std::memcmp(magic, "CHLO", 4) != 0) throw DataError("chunk file: bad magic");
  std::uint32_t version = 0;
  if (!get_u32(in, version) || !get_u32(in, r.num_chunks) || !get_u32(in, r.chunk_size) ||
      !get_u32(in, r.dim)) {
    throw DataError("chunk file truncated in header");
  }
  if (version != kChunkFileVersion) {
    throw DataError("chunk file: unsupported version " + std::to_string(version));
  }
  const std::size_t m = r.num_chunks;
  const std::size_t cells = m * r.chunk_size;
  read_exact(in, r.embeddings, m * r.dim, "embeddings");
  read_exact(in, r.chunk_valid, m, "chunk mask");
  read_exact(in, r.pad_mask, cells, "pad mask");
  read_exact(in, r.keyphrase_flags, cells, "keyphrase flags");
  return true;
}

}  // namespace chulo
