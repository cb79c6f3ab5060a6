#include <algorithm>

#include "doctest.h"
#include "dsq/error.hpp"
#include "dsq/task.hpp"

using namespace dsq;

TEST_CASE("task generation is deterministic per seed") {
  const auto a = make_copy_task(16, 8, 200, 7), b = make_copy_task(16, 8, 200, 7), c = make_copy_task(16, 8, 200, 8);
  CHECK(a.train.source == b.train.source);
  CHECK(a.valid.source == b.valid.source);
  CHECK_FALSE(a.train.source == c.train.source);
  CHECK(a.train.size() == 180);
  CHECK(a.valid.size() == 20);
}

TEST_CASE("copy and reverse targets") {
  const auto copy = make_copy_task(12, 6, 50, 1, CopyVariant::Copy);
  CHECK(copy.train.target == copy.train.source);
  const auto rev = make_copy_task(12, 6, 50, 1, CopyVariant::Reverse);
  for (std::size_t s = 0; s < rev.train.size(); ++s)
    for (int i = 0; i < 6; ++i) REQUIRE(rev.train.target[s * 6 + i] == rev.train.source[s * 6 + 5 - i]);
  for (int t : rev.train.source) REQUIRE((t >= 0 && t < 12));
}

TEST_CASE("mixed variant uses markers and balanced classes") {
  const auto task = make_copy_task(10, 5, 10000, 3, CopyVariant::Mixed, 0.0);
  std::size_t reversed = 0;
  for (std::size_t s = 0; s < task.train.size(); ++s) {
    const int* src = &task.train.source[s * 5];
    const int* tgt = &task.train.target[s * 5];
    REQUIRE((src[0] == 0 || src[0] == 1));
    REQUIRE(tgt[0] == src[0]);
    for (int i = 1; i < 5; ++i) {
      REQUIRE(src[i] >= 2);
      REQUIRE(tgt[i] == (src[0] == 0 ? src[i] : src[5 - i]));
    }
    reversed += src[0];
  }
  CHECK(std::abs(static_cast<double>(reversed) / 10000.0 - 0.5) < 0.05);
}

TEST_CASE("batches and slices") {
  const auto task = make_copy_task(9, 4, 30, 2);
  const std::vector<std::size_t> order{3, 0, 5};
  const auto b = task.train.batch(order, 1, 2);
  CHECK(b.batch_size == 2);
  CHECK(b.seq_len == 4);
  CHECK(std::equal(b.tokens.begin(), b.tokens.begin() + 4, task.train.source.begin()));
  CHECK(std::equal(b.tokens.begin() + 4, b.tokens.end(), task.train.source.begin() + 20));
  CHECK(task.train.slice(2, 3).tokens.size() == 12);
}

TEST_CASE("task argument validation") {
  CHECK_THROWS_AS(make_copy_task(3, 4, 10, 1), ConfigError);
  CHECK_THROWS_AS(make_copy_task(8, 1, 10, 1), ConfigError);
  CHECK(parse_variant("reverse") == CopyVariant::Reverse);
  CHECK(variant_name(CopyVariant::Mixed) == "mixed");
  CHECK_THROWS_AS(parse_variant("sort"), ConfigError);
}
