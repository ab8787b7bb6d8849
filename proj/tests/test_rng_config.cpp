#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/config.hpp"
#include "core/digest.hpp"
#include "core/errors.hpp"
#include "core/rng.hpp"

#include <cmath>
#include <cstdio>
#include <set>

using namespace sdda;

TEST_CASE("labeled streams are deterministic and independent") {
  Rng a = Rng::from_label(42, "init");
  Rng b = Rng::from_label(42, "init");
  Rng c = Rng::from_label(42, "dropout/source");
  bool all_equal = true, any_equal_cross = true;
  for (int i = 0; i < 64; ++i) {
    const uint64_t va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_equal_cross = any_equal_cross && va == c.next_u64();
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_cross);
}

TEST_CASE("uniform and normal draws look sane") {
  Rng rng(7);
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("below covers the range without bias at the ends") {
  Rng rng(9);
  std::set<uint32_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(rng.below(7));
  CHECK(seen.size() == 7);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 6);
  CHECK_THROWS_AS((void)rng.below(0), Error);
}

TEST_CASE("permutation is a bijection") {
  Rng rng(3);
  auto p = rng.permutation(100);
  std::set<int> s(p.begin(), p.end());
  CHECK(s.size() == 100);
}

TEST_CASE("config parses sections, comments and values") {
  const char* text =
      "# header comment\n"
      "[train]\n"
      "lambda1 = 2.5\n"
      "seed = 11   # trailing comment\n"
      "use_mmd = true\n"
      "\n"
      "[synth]\n"
      "classes = 4\n";
  Config c = Config::parse(text);
  CHECK(c.get_double("train", "lambda1", 0) == doctest::Approx(2.5));
  CHECK(c.get_int("train", "seed", 0) == 11);
  CHECK(c.get_bool("train", "use_mmd", false));
  CHECK(c.get_int("synth", "classes", 0) == 4);
  CHECK(c.get("missing", "key", "fallback") == "fallback");
  CHECK_THROWS_AS(Config::parse("[train]\nnot a pair\n"), Error);
  CHECK_THROWS_AS((void)c.get_int("train", "use_mmd", 0), Error);
}

TEST_CASE("later values and merges override earlier ones") {
  Config base = Config::parse("[train]\nseed = 1\neta = 0.5\n");
  Config over = Config::parse("[train]\nseed = 9\n");
  base.merge_from(over);
  CHECK(base.get_int("train", "seed", 0) == 9);
  CHECK(base.get_double("train", "eta", 0) == doctest::Approx(0.5));

  Config repeated = Config::parse("[a]\nk = 1\n[a]\nk = 2\n");
  CHECK(repeated.get_int("a", "k", 0) == 2);
}

TEST_CASE("serialization round trips") {
  Config c;
  c.set_double("train", "eta", 0.001);
  c.set_bool("train", "use_center", false);
  c.set_int("synth", "seed", 123);
  Config back = Config::parse(c.serialize());
  CHECK(back.get_double("train", "eta", 0) == 0.001);
  CHECK_FALSE(back.get_bool("train", "use_center", true));
  CHECK(back.get_int("synth", "seed", 0) == 123);
}

TEST_CASE("digest is stable and input sensitive") {
  const std::string p1 = "/tmp/sdda_digest_a.bin";
  const std::string p2 = "/tmp/sdda_digest_b.bin";
  {
    std::FILE* f = std::fopen(p1.c_str(), "wb");
    std::fputs("hello digest", f);
    std::fclose(f);
    f = std::fopen(p2.c_str(), "wb");
    std::fputs("hello digest!", f);
    std::fclose(f);
  }
  CHECK(file_digest(p1) == file_digest(p1));
  CHECK(file_digest(p1) != file_digest(p2));
  CHECK(file_digest(p1).size() == 16);
  CHECK_THROWS_AS(file_digest("/nonexistent/nope"), Error);
}
