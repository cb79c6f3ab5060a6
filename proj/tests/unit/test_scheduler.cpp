#include <cmath>
#include <random>
#include <tuple>

#include "doctest.h"
#include "dsq/error.hpp"
#include "dsq/scheduler.hpp"

using namespace dsq;

namespace {
const auto B = FormatKind::Bfp;
}

TEST_CASE("default ladder") {
  for (auto fam : {FormatKind::Fixed, B}) {
    const auto l = default_ladder(fam);
    REQUIRE(l.configs.size() == 3);
    CHECK(l.configs.front() == PrecisionConfig::of(fam, 2, 2, 2, 16));
    CHECK(l.configs.back() == PrecisionConfig::of(fam, 16, 4, 4, 16));
    CHECK(l.patience == 2);
    CHECK(l.min_delta == 0.0);
    CHECK(validate_ladder(l).empty());
  }
  CHECK_THROWS(default_ladder(FormatKind::Reference));
}

TEST_CASE("strictly improving losses never advance") {
  const auto l = default_ladder(B);
  ScheduleState s;
  for (int i = 0; i < 50; ++i) {
    auto [next, cfg] = observe_validation(l, s, 10.0 - 0.1 * i, i);
    s = std::move(next);
    REQUIRE(s.rung == 0);
    REQUIRE(cfg == l.configs[0]);
  }
  CHECK(s.trace.size() == 50);
}

TEST_CASE("plateau triggers a jump on the patience-th stale observation") {
  const ScheduleLadder l{{PrecisionConfig::of(B, 2, 2, 2, 16), PrecisionConfig::of(B, 16, 4, 4, 16)}, 2, 0.0};
  ScheduleState s;
  std::tie(s, std::ignore) = observe_validation(l, s, 1.0);
  std::tie(s, std::ignore) = observe_validation(l, s, 1.0);
  CHECK(s.rung == 0);
  const auto [last, cfg] = observe_validation(l, s, 1.0);
  CHECK(last.rung == 1);
  CHECK(cfg == PrecisionConfig::of(B, 16, 4, 4, 16));
  CHECK(last.stale == 0);
}

TEST_CASE("min_delta and non-finite losses") {
  const ScheduleLadder l{default_ladder(B).configs, 1, 0.1};
  ScheduleState s;
  std::tie(s, std::ignore) = observe_validation(l, s, 1.0);
  std::tie(s, std::ignore) = observe_validation(l, s, 0.95);  // not enough improvement
  CHECK(s.rung == 1);
  std::tie(s, std::ignore) = observe_validation(l, s, NAN);
  CHECK(s.rung == 2);
  CHECK(s.non_finite == 1);
  std::tie(s, std::ignore) = observe_validation(l, s, INFINITY);
  CHECK(s.rung == 2);  // no higher rung
  CHECK(current_config(l, s) == l.configs.back());
}

TEST_CASE("ladder validation") {
  CHECK_FALSE(validate_ladder({}).empty());
  ScheduleLadder low_q3{{PrecisionConfig::of(B, 2, 2, 2, 8)}, 2, 0.0};
  CHECK_FALSE(validate_ladder(low_q3).empty());
  CHECK_THROWS_AS(require_valid(low_q3), ConfigError);
  ScheduleLadder drops{{PrecisionConfig::of(B, 4, 4, 4, 16), PrecisionConfig::of(B, 2, 4, 4, 16)}, 2, 0.0};
  CHECK_FALSE(validate_ladder(drops).empty());
  ScheduleLadder bad_patience = default_ladder(B);
  bad_patience.patience = 0;
  CHECK_FALSE(validate_ladder(bad_patience).empty());
  ScheduleLadder bad_delta = default_ladder(B);
  bad_delta.min_delta = -1.0;
  CHECK_FALSE(validate_ladder(bad_delta).empty());
}

TEST_CASE("random loss sequences keep every invariant") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int run = 0; run < 1000; ++run) {
    ScheduleLadder l = default_ladder(run % 2 ? B : FormatKind::Fixed);
    l.patience = 1 + static_cast<int>(rng() % 4);
    l.min_delta = (rng() % 3) * 0.01;
    ScheduleState s;
    double best = INFINITY;
    int stale = 0, rung = 0;
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      const double loss = u(rng) < 0.05 ? NAN : u(rng) * 3.0;
      auto [next, cfg] = observe_validation(l, s, loss, i);
      // independent model of the transition
      if (std::isfinite(loss) && loss < best - l.min_delta) {
        best = loss;
        stale = 0;
      } else if (++stale >= l.patience && rung + 1 < static_cast<int>(l.configs.size())) {
        ++rung;
        stale = 0;
      }
      REQUIRE(next.rung == rung);
      REQUIRE(next.rung >= s.rung);
      REQUIRE(cfg == l.configs[next.rung]);
      REQUIRE(cfg.q3.bits() >= 16);
      if (next.rung > s.rung) REQUIRE(next.stale < l.patience);
      s = std::move(next);
    }
    for (std::size_t i = 1; i < s.trace.size(); ++i) REQUIRE(s.trace[i].rung >= s.trace[i - 1].rung);
  }
}
