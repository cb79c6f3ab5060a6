#include <cmath>

#include "doctest.h"
#include "dsq/error.hpp"
#include "dsq/optim.hpp"

using namespace dsq;

namespace {
const ModelSpec kSpec{1, 8, 2, 16, 6, 4, 2};
}

TEST_CASE("zero gradients leave the weights unchanged") {
  auto w = ModelWeights::init(kSpec, 1);
  const auto before = w;
  Adam adam(w);
  adam.step(w, ModelWeights::zeros_like(w), 0.1);
  CHECK(w.output == before.output);
  CHECK(w.blocks[0].wq == before.blocks[0].wq);
  CHECK(adam.steps() == 1);
}

TEST_CASE("first Adam step moves every weight by lr times the gradient sign") {
  auto w = ModelWeights::init(kSpec, 2);
  const auto before = w;
  auto g = ModelWeights::zeros_like(w);
  for (std::size_t i = 0; i < g.output.size(); ++i) g.output[i] = (i % 2 ? 1.0 : -1.0) * (1.0 + static_cast<double>(i));
  Adam adam(w, {0.9, 0.98, 1e-9, 0.0, 0.0});
  adam.step(w, g, 0.01);
  for (std::size_t i = 0; i < g.output.size(); ++i) {
    const double expected = before.output[i] - 0.01 * g.output[i] / (std::fabs(g.output[i]) + 1e-9);
    REQUIRE(w.output[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("non-finite gradients are rejected without touching the weights") {
  auto w = ModelWeights::init(kSpec, 3);
  const auto before = w;
  auto g = ModelWeights::zeros_like(w);
  g.blocks[0].wk[0] = std::nan("");
  Adam adam(w);
  CHECK_THROWS_AS(adam.step(w, g, 0.1), NumericError);
  CHECK(w.blocks[0].wk == before.blocks[0].wk);
}

TEST_CASE("gradient clipping bounds the global norm") {
  auto w = ModelWeights::init(kSpec, 4);
  auto g = ModelWeights::zeros_like(w);
  g.output[0] = 3.0;
  g.output[1] = 4.0;
  CHECK(global_norm(g) == 5.0);
}

TEST_CASE("learning-rate schedule") {
  const double base = 2.0;
  const std::int64_t warmup = 100;
  CHECK(lr_schedule(1, warmup, base) == doctest::Approx(base * std::pow(100.0, -1.5)));
  CHECK(lr_schedule(warmup, warmup, base) == doctest::Approx(base / 10.0));
  for (std::int64_t s = 1; s < warmup; ++s) REQUIRE(lr_schedule(s, warmup, base) < lr_schedule(s + 1, warmup, base));
  for (std::int64_t s = warmup; s < 1000; ++s) REQUIRE(lr_schedule(s, warmup, base) > lr_schedule(s + 1, warmup, base));
  CHECK(lr_schedule(400, warmup, base) == doctest::Approx(base / 20.0));
  CHECK_THROWS(lr_schedule(0, warmup, base));
}

TEST_CASE("optimizer traffic covers GEMM weights only") {
  const auto w = ModelWeights::init(kSpec, 5);
  CostLedger l;
  const auto table = UnitCostTable::defaults();
  const auto profile = TrafficProfile::default_profile();
  record_optimizer_traffic(l, w, profile, table);
  CHECK(l.empty());  // the default profile excludes optimizer state

  auto all = profile;
  all.rule(TensorClass::Optimizer).read = all.rule(TensorClass::Optimizer).write = true;
  all.rule(TensorClass::WeightGrad).read = true;
  record_optimizer_traffic(l, w, all, table);
  double weights = 0;
  const auto ts = w.tensors();
  const auto mask = w.gemm_mask();
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (mask[i]) weights += static_cast<double>(ts[i]->size());
  CHECK(l.bits(TensorClass::WeightGrad, Direction::Read) == 32 * weights);
  CHECK(l.bits(TensorClass::Optimizer, Direction::Read) == 3 * 32 * weights);
  CHECK(l.bits(TensorClass::Optimizer, Direction::Write) == 3 * 32 * weights);
}
