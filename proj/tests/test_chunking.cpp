#include <random>
#include <sstream>

#include "chulo/chunking.hpp"
#include "doctest.h"

using namespace chulo;

namespace {

std::vector<TokenId> iota_ids(std::size_t n) {
  std::vector<TokenId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<TokenId>(2 + i % 50);
  return ids;
}

CandidatePhrase with_spans(std::vector<Span> spans) {
  CandidatePhrase c;
  c.surface = "p";
  c.all_occurrences = std::move(spans);
  c.first_occurrence = c.all_occurrences.front().start;
  return c;
}

}  // namespace

TEST_CASE("chunk_document shapes") {
  auto a = chunk_tokens(iota_ids(1000), 50);
  CHECK(a.num_chunks == 20);
  CHECK(a.doc_length() == 1000);
  auto b = chunk_tokens(iota_ids(1001), 50);
  CHECK(b.num_chunks == 21);
  const auto last = b.chunk_pad_mask(20);
  CHECK(std::count(last.begin(), last.end(), 1) == 1);
  CHECK(b.chunk_tokens(20)[1] == kPadId);
  auto c = chunk_tokens({}, 50);
  CHECK(c.num_chunks == 0);
  CHECK(c.token_ids.empty());
  CHECK_THROWS_AS(chunk_tokens(iota_ids(3), 0), std::invalid_argument);

  Document doc;
  doc.id = "d";
  doc.tokens = {{"x", 5}, {"y", 6}, {"z", 7}};
  auto cs = chunk_document(doc, 2);
  CHECK(cs.doc_id == "d");
  CHECK(cs.token_ids == std::vector<TokenId>{5, 6, 7, kPadId});
}

TEST_CASE("mark_keyphrase_tokens") {
  auto cs = chunk_tokens(iota_ids(4), 2);
  const std::vector<CandidatePhrase> one = {with_spans({{1, 2}})};
  mark_keyphrase_tokens(cs, one);
  CHECK(cs.keyphrase_flags == std::vector<std::uint8_t>{0, 1, 1, 0});

  mark_keyphrase_tokens(cs, {});
  CHECK(cs.keyphrase_flags == std::vector<std::uint8_t>{0, 0, 0, 0});

  const std::vector<CandidatePhrase> overlap = {with_spans({{0, 1}}), with_spans({{1, 2}})};
  mark_keyphrase_tokens(cs, overlap);
  CHECK(cs.keyphrase_flags == std::vector<std::uint8_t>{1, 1, 1, 0});

  const std::vector<CandidatePhrase> bad = {with_spans({{3, 4}})};
  CHECK_THROWS_AS(mark_keyphrase_tokens(cs, bad), DataError);

  // PAD cells are never flagged.
  auto padded = chunk_tokens(iota_ids(3), 2);
  mark_keyphrase_tokens(padded, overlap);
  for (std::size_t k = 0; k < padded.pad_mask.size(); ++k) {
    if (padded.keyphrase_flags[k]) CHECK(padded.pad_mask[k]);
  }
}

TEST_CASE("chunk_embedding worked example") {
  Eigen::MatrixXd emb(2, 2);
  emb << 1, 0, 0, 1;
  const std::vector<std::uint8_t> flags = {1, 0}, pad = {1, 1};
  Eigen::VectorXd out(2);
  CHECK(chunk_embedding(flags, pad, emb, {0.8, 0.1}, out));
  CHECK(out(0) == doctest::Approx(0.8 / 0.9).epsilon(1e-15));
  CHECK(out(1) == doctest::Approx(0.1 / 0.9).epsilon(1e-15));
}

TEST_CASE("equal weights and all-keyphrase chunks give the plain mean") {
  std::mt19937 rng(2);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 16);
    Eigen::MatrixXd emb(n, 5);
    for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = normal(rng);
    std::vector<std::uint8_t> flags(n), pad(n, 1), all(n, 1);
    for (auto& f : flags) f = rng() % 2;
    const Eigen::VectorXd mean = emb.colwise().mean().transpose();
    Eigen::VectorXd eq(5), allk(5);
    chunk_embedding(flags, pad, emb, {0.3, 0.3}, eq);
    chunk_embedding(all, pad, emb, {0.8, 0.1}, allk);
    CHECK((eq - mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((allk - mean).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("chunk embedding properties") {
  std::mt19937 rng(6);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 20);
    const int d = 1 + static_cast<int>(rng() % 8);
    Eigen::MatrixXd emb(n, d);
    for (Eigen::Index i = 0; i < emb.size(); ++i) emb.data()[i] = normal(rng);
    std::vector<std::uint8_t> flags(n), pad(n);
    for (int k = 0; k < n; ++k) {
      pad[k] = rng() % 5 != 0;
      flags[k] = pad[k] && rng() % 3 == 0;
    }
    pad[0] = 1;
    flags[0] = 1;
    pad[1] = 1;
    flags[1] = 0;  // at least one of each kind

    Eigen::VectorXd base(d), scaled(d), limit(d);
    const double a = 0.2 + std::uniform_real_distribution<double>(0, 1)(rng);
    const double b = a * std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    REQUIRE(chunk_embedding(flags, pad, emb, {a, b}, base));

    // Invariance under uniform scaling of (a, b).
    chunk_embedding(flags, pad, emb, {7.5 * a, 7.5 * b}, scaled);
    CHECK((base - scaled).cwiseAbs().maxCoeff() < 1e-12);

    // Convex combination: each coordinate inside the real tokens' range.
    for (int j = 0; j < d; ++j) {
      double lo = 1e300, hi = -1e300;
      for (int k = 0; k < n; ++k) {
        if (!pad[k]) continue;
        lo = std::min(lo, emb(k, j));
        hi = std::max(hi, emb(k, j));
      }
      CHECK(base(j) >= lo - 1e-12);
      CHECK(base(j) <= hi + 1e-12);
    }

    // b -> 0+: converges to the mean of keyphrase-token embeddings.
    chunk_embedding(flags, pad, emb, {a, 1e-12}, limit);
    Eigen::VectorXd key_mean = Eigen::VectorXd::Zero(d);
    int keys = 0;
    for (int k = 0; k < n; ++k) {
      if (pad[k] && flags[k]) {
        key_mean += emb.row(k).transpose();
        ++keys;
      }
    }
    key_mean /= keys;
    CHECK((limit - key_mean).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("all-PAD chunk is zero and invalid") {
  Eigen::MatrixXd emb = Eigen::MatrixXd::Ones(3, 4);
  const std::vector<std::uint8_t> flags(3, 0), pad(3, 0);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(4, 9.0);
  CHECK_FALSE(chunk_embedding(flags, pad, emb, {0.8, 0.1}, out));
  CHECK(out.isZero(0.0));
}

TEST_CASE("embed_document composes per-chunk results") {
  std::mt19937 rng(4);
  Eigen::MatrixXd table = Eigen::MatrixXd::Random(60, 6);
  auto cs = chunk_tokens(iota_ids(13), 5);
  const std::vector<CandidatePhrase> keys = {with_spans({{2, 4}, {9, 9}})};
  mark_keyphrase_tokens(cs, keys);
  const auto m = embed_document(cs, table, {0.8, 0.1});
  REQUIRE(m.rows.rows() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    Eigen::MatrixXd gathered(5, 6);
    for (int k = 0; k < 5; ++k) gathered.row(k) = table.row(cs.chunk_tokens(i)[k]);
    Eigen::VectorXd row(6);
    chunk_embedding(cs.chunk_flags(i), cs.chunk_pad_mask(i), gathered, {0.8, 0.1}, row);
    CHECK(row.transpose() == m.rows.row(static_cast<Eigen::Index>(i)));
    CHECK(m.chunk_valid[i] == 1);
  }
  CHECK(embed_document(chunk_tokens({}, 5), table, {0.8, 0.1}).rows.rows() == 0);

  auto out_of_range = chunk_tokens(std::vector<TokenId>{70}, 5);
  CHECK_THROWS_AS(embed_document(out_of_range, table, {0.8, 0.1}), std::out_of_range);
}

TEST_CASE("chunking then dropping PAD is the identity") {
  std::mt19937 rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    const auto ids = iota_ids(rng() % 300);
    const std::size_t n = 1 + rng() % 64;
    const auto cs = chunk_tokens(ids, n);
    CHECK(cs.num_chunks == (ids.size() + n - 1) / n);
    CHECK(cs.real_tokens() == ids);
  }
}

TEST_CASE("chunks.bin records round-trip") {
  Eigen::MatrixXd table = Eigen::MatrixXd::Random(60, 3);
  auto cs = chunk_tokens(iota_ids(7), 3);
  const std::vector<CandidatePhrase> keys = {with_spans({{0, 1}})};
  mark_keyphrase_tokens(cs, keys);
  const auto rec = make_chunk_record(cs, embed_document(cs, table, {0.8, 0.1}));

  std::stringstream ss;
  write_chunk_record(ss, rec);
  write_chunk_record(ss, rec);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "CHLO");
  CHECK(bytes.size() == 2 * (20 + 3 * 3 * 4 + 3 + 9 + 9));
  // Little-endian header: version 1, m 3, n 3, d 3.
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 3);

  ChunkRecord back;
  CHECK(read_chunk_record(ss, back));
  CHECK(back.embeddings == rec.embeddings);
  CHECK(back.keyphrase_flags == rec.keyphrase_flags);
  CHECK(back.pad_mask == rec.pad_mask);
  CHECK(back.chunk_valid == rec.chunk_valid);
  CHECK(read_chunk_record(ss, back));
  CHECK_FALSE(read_chunk_record(ss, back));

  std::stringstream corrupt(std::string("CHLX") + bytes.substr(4));
  CHECK_THROWS_AS(read_chunk_record(corrupt, back), DataError);
}
