#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "llmap/error.hpp"
#include "llmap/matrix_core.hpp"

using namespace llmap;

namespace {

Metadata simple_meta(std::size_t k, std::size_t n) {
  Metadata meta;
  for (std::size_t i = 0; i < k; ++i) meta.models.push_back({"m" + std::to_string(i), "t", {}, {}, {}, {}});
  for (std::size_t s = 0; s < n; ++s) meta.texts.push_back({"x" + std::to_string(s), "c", 100});
  return meta;
}

LogLikMatrix wrap(const Matrix& values) {
  const Metadata meta = simple_meta(std::size_t(values.rows()), std::size_t(values.cols()));
  return LogLikMatrix{meta.models, meta.texts, values};
}

}  // namespace

TEST_CASE("parse_matrix reads a small TSV") {
  const auto m = parse_matrix("model_id\tx0\tx1\tx2\nm0\t-1.0\t-1.0\t-1.0\nm1\t-1\t-1\t-1\n", simple_meta(2, 3));
  CHECK(m.n_models() == 2);
  CHECK(m.n_texts() == 3);
  CHECK((m.values.array() == -1.0).all());
  CHECK(m.model_ids() == std::vector<std::string>{"m0", "m1"});
}

TEST_CASE("parse_matrix rejects malformed input") {
  const Metadata meta = simple_meta(2, 2);
  CHECK_THROWS_AS(parse_matrix("model_id\tx0\tx9\nm0\t1\t2\n", meta), DataError);
  CHECK_THROWS_AS(parse_matrix("id\tx0\tx1\nm0\t1\t2\n", meta), DataError);
  CHECK_THROWS_AS(parse_matrix("model_id\tx0\tx1\nm0\t1\tabc\n", meta), DataError);
  CHECK_THROWS_AS(parse_matrix("model_id\tx0\tx1\nm0\t1\tnan\n", meta), DataError);
  CHECK_THROWS_AS(parse_matrix("model_id\tx0\tx1\nm0\t1\tinf\n", meta), DataError);
  CHECK_THROWS_AS(parse_matrix("model_id\tx0\tx1\nm0\t1\n", meta), DataError);
  CHECK_THROWS_AS(parse_matrix("model_id\tx0\tx0\nm0\t1\t2\n", meta), DataError);
  CHECK_THROWS_AS(parse_matrix("model_id\tx0\tx1\nm0\t1\t2\nm0\t1\t2\n", meta), DataError);
  CHECK_THROWS_AS(parse_matrix("model_id\tx0\tx1\n", meta), DataError);
}

TEST_CASE("metadata parsing validates records") {
  const auto meta = parse_metadata(R"({"models":[{"id":"a","type":"llama","params":7e9,"created":"2023-05-01",
      "tags":["x"],"scores":{"ARC":55.5,"MMLU":null}}],"texts":[{"id":"t","category":"web","byte_length":12,"extra":1}]})");
  REQUIRE(meta.models.size() == 1);
  CHECK(*meta.models[0].param_count == 7000000000LL);
  CHECK(meta.models[0].benchmark_scores.size() == 1);
  CHECK(meta.texts[0].byte_length == 12);
  CHECK_THROWS_AS(parse_metadata(R"({"models":[{"id":"a","scores":{"ARC":101}}]})"), DataError);
  CHECK_THROWS_AS(parse_metadata(R"({"texts":[{"id":"t","byte_length":0}]})"), DataError);
  CHECK_THROWS_AS(parse_metadata(R"({"models":[{"id":"a"},{"id":"a"}]})"), DataError);
  CHECK_THROWS_AS(parse_metadata("{"), DataError);
}

TEST_CASE("save(load(f)) is byte-identical to the canonical form") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto k = Eigen::Index(1 + rng.below(6));
    const auto n = Eigen::Index(1 + rng.below(9));
    const LogLikMatrix m = wrap(testutil::random_matrix(rng, k, n, 100.0, -300.0));
    const std::string canonical = format_matrix(m);
    const Metadata meta = parse_metadata(format_metadata(metadata_of(m)));
    const LogLikMatrix back = parse_matrix(canonical, meta);
    CHECK(back.values == m.values);
    CHECK(format_matrix(back) == canonical);
    CHECK(format_metadata(meta) == format_metadata(metadata_of(m)));
  }
}

TEST_CASE("load_matrix reads files from disk") {
  const auto dir = std::filesystem::temp_directory_path() / "llmap_unit_load";
  std::filesystem::create_directories(dir);
  const LogLikMatrix m = wrap((Matrix(2, 2) << 1, 3, 2, 2).finished());
  std::ofstream(dir / "m.tsv") << format_matrix(m);
  std::ofstream(dir / "m.json") << format_metadata(metadata_of(m));
  const auto back = load_matrix(dir / "m.tsv", dir / "m.json");
  CHECK(back.values == m.values);
  CHECK_THROWS_AS(load_matrix(dir / "missing.tsv", dir / "m.json"), DataError);
}

TEST_CASE("type-7 quantile") {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[std::size_t(i)] = -(i + 1);
  CHECK(quantile_linear(v, 0.02) == doctest::Approx(-98.02).epsilon(1e-12));
  CHECK(quantile_linear(v, 0.0) == -100.0);
  CHECK(quantile_linear(v, 1.0) == -1.0);
  CHECK(quantile_linear({4.0}, 0.3) == 4.0);
}

TEST_CASE("clip_lower worked example and edge cases") {
  Matrix row(1, 100);
  for (int i = 0; i < 100; ++i) row(0, i) = -(i + 1);
  const auto [clipped, report] = clip_lower(wrap(row), 0.02);
  CHECK(report.threshold == doctest::Approx(-98.02).epsilon(1e-12));
  CHECK(report.entries_clipped == 2);
  CHECK(clipped.values(0, 98) == report.threshold);
  CHECK(clipped.values(0, 99) == report.threshold);
  CHECK(clipped.values(0, 97) == -98.0);
  CHECK((clipped.values.leftCols(98).array() == row.leftCols(98).array()).all());

  const auto [same, r0] = clip_lower(wrap(row), 0.0);
  CHECK(same.values == row);
  CHECK(r0.entries_clipped == 0);

  const Matrix flat = Matrix::Constant(3, 4, -7.5);
  CHECK(clip_lower(wrap(flat), 0.3).first.values == flat);
  CHECK_THROWS_AS(clip_lower(wrap(flat), 1.0), ConfigError);
  CHECK_THROWS_AS(clip_lower(wrap(flat), -0.1), ConfigError);
}

TEST_CASE("clip_lower properties") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto k = Eigen::Index(1 + rng.below(8));
    const auto n = Eigen::Index(1 + rng.below(30));
    const Matrix a = testutil::random_matrix(rng, k, n, 10.0);
    Matrix b = a;
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] += std::abs(rng.normal());
    const double f = 0.3 * rng.uniform01();
    const auto [ca, ra] = clip_lower(wrap(a), f);
    const auto [cb, rb] = clip_lower(wrap(b), f);
    CHECK((ca.values.array() <= cb.values.array()).all());
    CHECK(ra.entries_clipped <= std::size_t(std::ceil(f * double(a.size()))));
    CHECK((ca.values.array() >= a.array()).all());

    // A second pass only touches entries the first pass already set.
    const auto [twice, r2] = clip_lower(ca, f);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (twice.values.data()[i] != ca.values.data()[i]) CHECK(ca.values.data()[i] == ra.threshold);
    }
  }
}

TEST_CASE("clip_lower is idempotent when the quantile lands on an order statistic") {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix a = testutil::random_matrix(rng, 5, 21, 4.0);  // 105 entries, h = 104 f
    const double f = double(1 + rng.below(10)) / 104.0;
    const auto once = clip_lower(wrap(a), f).first;
    const auto twice = clip_lower(once, f).first;
    CHECK(twice.values == once.values);
  }
}

TEST_CASE("per-row clipping uses one threshold per model") {
  Matrix m(2, 5);
  m << -1, -2, -3, -4, -5, -10, -20, -30, -40, -50;
  const auto [c, r] = clip_lower(wrap(m), 0.25, ClipScope::per_row);
  REQUIRE(r.row_thresholds.size() == 2);
  CHECK(r.row_thresholds[0] == doctest::Approx(-4.0));
  CHECK(r.row_thresholds[1] == doctest::Approx(-40.0));
  CHECK(c.values(0, 4) == doctest::Approx(-4.0));
  CHECK(c.values(1, 4) == doctest::Approx(-40.0));
  CHECK(r.entries_clipped == 2);
}

TEST_CASE("double_center worked example") {
  const auto c = double_center(Matrix((Matrix(2, 2) << 1, 3, 2, 2).finished()));
  CHECK(c.mean_loglik == Vector((Vector(2) << 2, 2).finished()));
  CHECK(c.xi == (Matrix(2, 2) << -1, 1, 0, 0).finished());
  CHECK(c.column_mean_xi == Vector((Vector(2) << -0.5, 0.5).finished()));
  CHECK(c.q == (Matrix(2, 2) << -0.5, 0.5, 0.5, -0.5).finished());
}

TEST_CASE("double_center degenerate inputs") {
  const auto flat = double_center(Matrix::Constant(3, 4, -12.25));
  CHECK(testutil::max_abs(flat.xi) == 0.0);
  CHECK(testutil::max_abs(flat.q) == 0.0);
  SplitMix64 rng(1);
  const auto single = double_center(testutil::random_matrix(rng, 1, 7));
  CHECK(testutil::max_abs(single.q) == 0.0);
  CHECK(single.column_mean_xi == single.xi.row(0).transpose());
  CHECK_THROWS_AS(double_center(Matrix(0, 3)), DataError);
}

TEST_CASE("double_center invariants on random matrices") {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const auto k = Eigen::Index(1 + rng.below(12));
    const auto n = Eigen::Index(1 + rng.below(80));
    const Matrix l = testutil::random_matrix(rng, k, n, 30.0, -400.0);
    const auto c = double_center(l);
    const double scale = testutil::max_abs(l);
    for (Eigen::Index i = 0; i < k; ++i) {
      CHECK(std::abs(c.xi.row(i).sum()) <= 1e-9 * double(n) * scale);
      CHECK(std::abs(c.q.row(i).mean()) <= 1e-9 * scale);
    }
    for (Eigen::Index s = 0; s < n; ++s) {
      CHECK(std::abs(c.q.col(s).mean()) <= 1e-9 * scale);
      for (Eigen::Index i = 0; i < k; ++i) {
        CHECK(c.xi(i, s) - c.q(i, s) == doctest::Approx(c.column_mean_xi(s)).epsilon(1e-12).scale(scale));
        CHECK(testutil::rel_diff(c.mean_loglik(i) + c.column_mean_xi(s) + c.q(i, s), l(i, s)) <= 1e-9);
      }
    }
    const auto again = double_center(c.q);
    CHECK(testutil::max_abs(again.q - c.q) <= 1e-9 * scale);
    CHECK(again.mean_loglik.cwiseAbs().maxCoeff() <= 1e-9 * scale);

    const Matrix l2 = testutil::random_matrix(rng, k, n, 5.0);
    const double a = rng.normal(), b = rng.normal();
    const auto lin = double_center(Matrix(a * l + b * l2));
    const auto c2 = double_center(l2);
    CHECK(testutil::max_abs(lin.q - (a * c.q + b * c2.q)) <= 1e-9 * (std::abs(a) * scale + std::abs(b) * 30.0));
  }
}

TEST_CASE("utf8 validation") {
  CHECK(is_valid_utf8("plain"));
  CHECK(is_valid_utf8("\xE2\x82\xAC"));
  CHECK(is_valid_utf8("\xF0\x9F\x98\x80"));
  CHECK_FALSE(is_valid_utf8("\xE2\x82"));
  CHECK_FALSE(is_valid_utf8("\xC0\xAF"));
  CHECK_FALSE(is_valid_utf8("\xED\xA0\x80"));
  CHECK_FALSE(is_valid_utf8("\xFF"));
}

TEST_CASE("chunk_corpus examples") {
  std::vector<SourceText> two{{"a", "web", std::string(2048, 'x')}};
  auto chunks = chunk_corpus(two, 1024, 256);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].record.byte_length == 1024);
  CHECK(chunks[1].record.text_id == "a#1");

  std::vector<SourceText> small{{"b", "web", std::string(200, 'y')}};
  CHECK(chunk_corpus(small, 1024, 256).empty());

  std::vector<SourceText> split{{"c", "web", std::string(1023, 'z') + "\xE2\x82\xAC" + std::string(300, 'z')}};
  chunks = chunk_corpus(split, 1024, 256);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].record.byte_length == 1023);
  CHECK(chunks[1].payload.substr(0, 3) == "\xE2\x82\xAC");
  CHECK(chunks[1].record.byte_length == 303);

  CHECK_THROWS_AS(chunk_corpus(small, 256, 256), ConfigError);
  CHECK_THROWS_AS(chunk_corpus(small, 256, 0), ConfigError);
  std::vector<SourceText> bad{{"d", "web", "ok\xFF"}};
  CHECK_THROWS_AS(chunk_corpus(bad, 1024, 1), DataError);
}

TEST_CASE("chunks concatenate to the source and decode") {
  SplitMix64 rng(8);
  const std::vector<std::string> pieces{"a", "\xC3\xA9", "\xE2\x82\xAC", "\xF0\x9F\x98\x80"};
  for (int trial = 0; trial < 30; ++trial) {
    std::string text;
    const auto len = 1 + rng.below(3000);
    for (std::size_t t = 0; t < len; ++t) text += pieces[rng.below(pieces.size())];
    const std::size_t chunk = 4 + rng.below(200);
    std::vector<SourceText> src{{"s", "c", text}};
    const auto chunks = chunk_corpus(src, chunk, 1);
    std::string joined;
    for (const auto& c : chunks) {
      CHECK(is_valid_utf8(c.payload));
      CHECK(c.payload.size() <= chunk);
      CHECK(std::size_t(c.record.byte_length) == c.payload.size());
      joined += c.payload;
    }
    CHECK(joined == text);
  }
}

namespace {

// Independent reference: a separately written SplitMix64 stream and Fisher-Yates.
std::vector<std::size_t> reference_sample(std::size_t count, std::size_t n, std::uint64_t seed) {
  std::uint64_t state = seed;
  auto next = [&state]() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  auto below = [&](std::uint64_t m) {
    // Documented rule: discard draws below (2^64 - m) mod m.
    const std::uint64_t reject_below = (std::numeric_limits<std::uint64_t>::max() - m + 1) % m;
    std::uint64_t r;
    do r = next();
    while (r < reject_below);
    return r % m;
  };
  std::vector<std::size_t> pool(count);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + below(count - i)]);
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

TEST_CASE("SplitMix64 matches published outputs") {
  SplitMix64 a(1234567);
  CHECK(a.next() == 6457827717110365317ULL);
  CHECK(a.next() == 3203168211198807973ULL);
  CHECK(a.next() == 9817491932198370423ULL);
  SplitMix64 b(0);
  CHECK(b.next() == 16294208416658607535ULL);
}

TEST_CASE("sample_texts") {
  std::vector<TextRecord> recs;
  for (int i = 0; i < 1000; ++i) recs.push_back({"t" + std::to_string(i), "c", 10});
  for (std::uint64_t seed : {0ULL, 1ULL, 77ULL, 123456789ULL}) {
    const auto got = sample_indices(1000, 10, seed);
    CHECK(got == reference_sample(1000, 10, seed));
  }
  const auto all = sample_texts(recs, 1000, 3);
  CHECK(all.size() == 1000);
  CHECK(all.front().text_id == "t0");
  const auto s1 = sample_texts(recs, 50, 42);
  const auto s2 = sample_texts(recs, 50, 42);
  CHECK(std::equal(s1.begin(), s1.end(), s2.begin(), [](auto& x, auto& y) { return x.text_id == y.text_id; }));
  CHECK_THROWS_AS(sample_texts(recs, 1001, 1), ConfigError);
}
