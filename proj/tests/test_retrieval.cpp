#include <algorithm>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "dsdh/binary_io.hpp"
#include "dsdh/error.hpp"
#include "dsdh/retrieval.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace dsdh;

namespace {

std::vector<double> random_code(std::size_t k, SplitMix64& rng) {
  std::vector<double> c(k);
  for (double& v : c) v = (rng.next() & 1) ? 1.0 : -1.0;
  return c;
}

// Distance from the +-1 inner product.
std::size_t dot_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
  return static_cast<std::size_t>((static_cast<double>(a.size()) - d) / 2);
}

}  // namespace

TEST_CASE("pack examples") {
  const std::vector<double> ones(4, 1.0), minus(4, -1.0);
  CHECK(pack(ones).words == std::vector<std::uint64_t>{0b1111});
  CHECK(pack(minus).words == std::vector<std::uint64_t>{0});
  const std::vector<double> wide(65, 1.0);
  const PackedCode p = pack(wide);
  REQUIRE(p.words.size() == 2);
  CHECK(p.words[0] == ~std::uint64_t{0});
  CHECK(p.words[1] == 1);

  const std::vector<double> bad{1, -1, 0.5};
  try {
    pack(bad);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("entry 2") != std::string::npos);
  }
}

TEST_CASE("pack and unpack are inverse") {
  SplitMix64 rng(1);
  for (std::size_t k : {1, 12, 63, 64, 65, 128, 130}) {
    const auto c = random_code(k, rng);
    const PackedCode p = pack(c);
    CHECK(unpack(p) == c);
    CHECK(pack(unpack(p)) == p);
    if (k % 64 != 0) CHECK((p.words.back() >> (k % 64)) == 0);
  }
}

TEST_CASE("hamming examples") {
  SplitMix64 rng(2);
  const auto a = random_code(12, rng);
  std::vector<double> comp(a);
  for (double& v : comp) v = -v;
  CHECK(hamming(pack(a), pack(a)) == 0);
  CHECK(hamming(pack(a), pack(comp)) == 12);

  std::vector<double> x(48, 1.0), y(48, 1.0);
  for (std::size_t i = 0; i < 24; ++i) y[i] = -1.0;  // <x, y> = 0
  CHECK(hamming(pack(x), pack(y)) == 24);

  CHECK_THROWS_AS(hamming(pack(x), pack(a)), DimensionError);
}

TEST_CASE("hamming equals the inner-product identity") {
  SplitMix64 rng(3);
  for (std::size_t k : {12, 48, 64, 65, 128}) {
    for (int t = 0; t < 2000; ++t) {
      const auto a = random_code(k, rng), b = random_code(k, rng), c = random_code(k, rng);
      const PackedCode pa = pack(a), pb = pack(b), pc = pack(c);
      CHECK(hamming(pa, pb) == dot_distance(a, b));
      CHECK(hamming(pa, pb) == hamming(pb, pa));
      CHECK(hamming(pa, pc) <= hamming(pa, pb) + hamming(pb, pc));
    }
  }
}

TEST_CASE("rank") {
  SplitMix64 rng(4);
  SUBCASE("query present comes first") {
    CodeDatabase db(16);
    for (std::uint64_t id = 0; id < 20; ++id) db.add(id * 10, pack(random_code(16, rng)));
    const PackedCode q = db.code(7);
    const auto r = rank(db, q);
    CHECK(r.front().distance == 0);
    // Exact duplicates may precede it, but only with an earlier index.
    const auto it = std::find_if(r.begin(), r.end(), [](const Neighbor& n) { return n.id == 70; });
    REQUIRE(it != r.end());
    CHECK(it->distance == 0);
  }
  SUBCASE("ties keep insertion order") {
    CodeDatabase db(4);
    db.add(9, pack(std::vector<double>{1, 1, -1, -1}));
    db.add(3, pack(std::vector<double>{-1, -1, 1, 1}));
    db.add(5, pack(std::vector<double>{1, 1, 1, -1}));
    const auto r = rank(db, pack(std::vector<double>{1, 1, 1, 1}));
    CHECK(r[0].id == 5);
    CHECK(r[1].id == 9);
    CHECK(r[2].id == 3);
    CHECK(r[1].distance == 2);
    CHECK(r[2].distance == 2);
  }
  SUBCASE("matches a naive dot-product ranking") {
    for (std::size_t k : {12, 64, 65}) {
      CodeDatabase db(k);
      std::vector<std::vector<double>> codes;
      for (std::uint64_t id = 0; id < 100; ++id) {
        codes.push_back(random_code(k, rng));
        db.add(1000 - id, pack(codes.back()));
      }
      const auto q = random_code(k, rng);
      std::vector<std::pair<double, std::size_t>> naive;
      for (std::size_t i = 0; i < codes.size(); ++i) {
        double dot = 0;
        for (std::size_t b = 0; b < k; ++b) dot += q[b] * codes[i][b];
        naive.push_back({-dot, i});
      }
      std::sort(naive.begin(), naive.end());
      const auto r = rank(db, pack(q));
      REQUIRE(r.size() == 100);
      std::set<std::uint64_t> ids;
      for (std::size_t i = 0; i < 100; ++i) {
        CHECK(r[i].index == naive[i].second);
        CHECK(r[i].id == db.id(naive[i].second));
        ids.insert(r[i].id);
      }
      CHECK(ids.size() == 100);
    }
  }
  SUBCASE("length mismatch") {
    CodeDatabase db(8);
    db.add(1, pack(random_code(8, rng)));
    CHECK_THROWS_AS(rank(db, pack(random_code(9, rng))), DimensionError);
  }
}

TEST_CASE("within_radius") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 4 + rng.below(20);
    CodeDatabase db(k);
    for (std::uint64_t id = 0; id < 60; ++id) db.add(id, pack(random_code(k, rng)));
    const PackedCode q = pack(random_code(k, rng));
    CHECK(within_radius(db, q, k).size() == db.size());
    for (std::size_t r : {std::size_t{0}, std::size_t{2}, k / 2}) {
      const auto got = within_radius(db, q, r);
      std::vector<std::size_t> expect;
      for (std::size_t i = 0; i < db.size(); ++i)
        if (dot_distance(unpack(db.code(i)), unpack(q)) <= r) expect.push_back(i);
      REQUIRE(got.size() == expect.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].index == expect[i]);
    }
  }
}

TEST_CASE("database invariants") {
  CodeDatabase db(8);
  db.add(4, pack(std::vector<double>(8, 1.0)));
  CHECK_THROWS_AS(db.add(4, pack(std::vector<double>(8, -1.0))), DataError);
  CHECK_THROWS_AS(db.add(5, pack(std::vector<double>(9, -1.0))), DimensionError);
  const Matrix codes = Matrix::from_rows({{1, -1}, {-1, -1}});
  const std::vector<std::uint64_t> ids{1};
  CHECK_THROWS_AS(CodeDatabase::from_codes(codes, ids), DimensionError);
}

TEST_CASE("database file round trip") {
  const auto dir = testing::scratch_dir("retrieval_db");
  SplitMix64 rng(6);
  for (std::size_t k : {1, 12, 64, 65, 128}) {
    const Matrix codes = testing::random_codes(k, 37, rng);
    std::vector<std::uint64_t> ids(37);
    for (auto& id : ids) id = rng.next();
    const CodeDatabase db = CodeDatabase::from_codes(codes, ids);
    save_database(db, dir / "a.dsdc");
    const CodeDatabase back = load_database(dir / "a.dsdc");
    CHECK(back == db);
    for (std::size_t i = 0; i < 37; ++i) CHECK(unpack(back.code(i)) == codes.col(i));
    save_database(back, dir / "b.dsdc");
    CHECK(testing::read_file(dir / "a.dsdc") == testing::read_file(dir / "b.dsdc"));
  }
}

TEST_CASE("database file rejects corruption") {
  const auto dir = testing::scratch_dir("retrieval_bad");
  {
    std::ofstream out(dir / "pad.dsdc", std::ios::binary);
    io::Writer w(out);
    w.magic("DSDC");
    w.u32(1);
    w.u32(4);
    w.u32(1);
    w.u64(0);
    w.u64(0b10001);  // bit 4 is padding for K = 4
  }
  CHECK_THROWS_AS(load_database(dir / "pad.dsdc"), DataError);
  testing::write_file(dir / "magic.dsdc", "DSDH....");
  CHECK_THROWS_AS(load_database(dir / "magic.dsdc"), DataError);
  {
    std::ofstream out(dir / "short.dsdc", std::ios::binary);
    io::Writer w(out);
    w.magic("DSDC");
    w.u32(1);
    w.u32(4);
    w.u32(3);
    w.u64(0);
    w.u64(1);
  }
  CHECK_THROWS_AS(load_database(dir / "short.dsdc"), DataError);
}
