#include <cmath>

#include "doctest.h"
#include "dsq/error.hpp"
#include "dsq/train.hpp"

using namespace dsq;

namespace {

const ModelSpec kSpec{1, 16, 2, 32, 8, 6, 8};

TrainOptions quick(int epochs) {
  TrainOptions o;
  o.epochs = epochs;
  o.seed = 3;
  o.warmup = 10;
  return o;
}

void check_close(const CostLedger& a, const CostLedger& b) {
  CHECK(a.mac_units == doctest::Approx(b.mac_units).epsilon(1e-9));
  CHECK(a.macs == b.macs);
  CHECK(a.gemms == b.gemms);
  for (auto c : kTensorClasses)
    for (auto d : {Direction::Read, Direction::Write}) {
      CHECK(a.bits(c, d) == doctest::Approx(b.bits(c, d)).epsilon(1e-9));
      CHECK(a.transfer_count(c, d) == b.transfer_count(c, d));
    }
}

}  // namespace

TEST_CASE("zero epochs evaluates the initial model only") {
  const auto task = make_copy_task(8, 6, 40, 1);
  const auto r = train_run(kSpec, task, PrecisionPlan::static_config(PrecisionConfig::reference()), quick(0));
  CHECK(r.steps == 0);
  CHECK(r.ledger.empty());
  REQUIRE(r.epochs.size() == 1);
  CHECK(std::isnan(r.epochs[0].train_loss));
  CHECK(r.verdict == "Completed");
}

TEST_CASE("same seed gives identical reports") {
  const auto task = make_copy_task(8, 6, 80, 2);
  const auto plan = PrecisionPlan::schedule(default_ladder(FormatKind::Bfp));
  const auto a = train_run(kSpec, task, plan, quick(3), UnitCostTable::defaults(),
                           TrafficProfile::default_profile(), "dsq");
  const auto b = train_run(kSpec, task, plan, quick(3), UnitCostTable::defaults(),
                           TrafficProfile::default_profile(), "dsq");
  CHECK(metrics_jsonl(a) == metrics_jsonl(b));
  CHECK(summary_json(a) == summary_json(b));
  CHECK(a.steps == 3 * 9);
  CHECK(a.trace.size() == 3);
}

TEST_CASE("the live ledger of a static run equals the static estimate") {
  const auto task = make_copy_task(8, 6, 80, 4);
  const auto table = UnitCostTable::defaults();
  const auto profile = TrafficProfile::default_profile();
  for (const auto& cfg : {PrecisionConfig::reference(), PrecisionConfig::of(FormatKind::Bfp, 16, 4, 4, 16),
                          PrecisionConfig::of(FormatKind::Fixed, 8, 8, 8, 16)}) {
    const auto r = train_run(kSpec, task, PrecisionPlan::static_config(cfg), quick(2), table, profile);
    check_close(r.ledger, estimate_static(kSpec, cfg, r.steps, table, profile));
    // cumulative per-epoch ledgers grow with the step count
    CHECK(r.epochs[1].ledger.mac_units * 2 == doctest::Approx(r.epochs[2].ledger.mac_units));
  }
}

TEST_CASE("a schedule ledger is the sum of its rung intervals") {
  const auto task = make_copy_task(8, 6, 80, 5);
  ScheduleLadder l = default_ladder(FormatKind::Bfp);
  l.patience = 1;
  l.min_delta = 1e9;  // every observation is a plateau
  const auto r = train_run(kSpec, task, PrecisionPlan::schedule(l), quick(4));
  std::vector<PrecisionConfig> cfgs;
  std::vector<std::int64_t> steps;
  for (std::size_t e = 1; e < r.epochs.size(); ++e) {
    cfgs.push_back(r.epochs[e].config);
    steps.push_back(r.epochs[e].step - r.epochs[e - 1].step);
  }
  // the first observation always sets the best loss, so advances start after epoch 2
  REQUIRE(cfgs.size() == 4);
  CHECK(cfgs[0] == l.configs[0]);
  CHECK(cfgs[1] == l.configs[0]);
  CHECK(cfgs[2] == l.configs[1]);
  CHECK(cfgs[3] == l.configs[2]);
  check_close(r.ledger, estimate_schedule(kSpec, cfgs, steps, UnitCostTable::defaults(),
                                          TrafficProfile::default_profile()));
}

TEST_CASE("learning happens at Reference precision") {
  const auto task = make_copy_task(8, 6, 160, 6);
  auto o = quick(6);
  const auto r = train_run(kSpec, task, PrecisionPlan::static_config(PrecisionConfig::reference()), o);
  CHECK(r.final_valid_loss() < r.epochs.front().valid_loss);
}

TEST_CASE("divergence is reported as Failed") {
  const auto task = make_copy_task(8, 6, 80, 7);
  auto o = quick(6);
  o.base_lr = 1e6;
  o.divergence_factor = 1.0001;
  o.divergence_window = 1;
  const auto r = train_run(kSpec, task, PrecisionPlan::static_config(PrecisionConfig::reference()), o);
  CHECK(r.failed());
  CHECK_FALSE(r.events.empty());
  CHECK(r.epochs.size() < 7);
}

TEST_CASE("training needs at least one full batch") {
  const auto task = make_copy_task(8, 6, 5, 1);
  CHECK_THROWS_AS(train_run(kSpec, task, PrecisionPlan::static_config(PrecisionConfig::reference()), quick(1)),
                  ConfigError);
  auto o = quick(1);
  o.epochs = -1;
  CHECK_THROWS_AS(train_run(kSpec, make_copy_task(8, 6, 80, 1), PrecisionPlan{}, o), ConfigError);
}
