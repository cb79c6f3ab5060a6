#include <cmath>
#include <random>

#include "doctest.h"
#include "dsq/error.hpp"
#include "dsq/model.hpp"
#include "oracles.hpp"

using namespace dsq;

namespace {

Batch random_batch(const ModelSpec& spec, std::mt19937_64& rng) {
  Batch b;
  b.batch_size = spec.batch_size;
  b.seq_len = spec.seq_len;
  std::uniform_int_distribution<int> tok(0, spec.vocab - 1);
  for (int i = 0; i < spec.batch_size * spec.seq_len; ++i) {
    b.tokens.push_back(tok(rng));
    b.targets.push_back(tok(rng));
  }
  return b;
}

// Compares backprop against central differences for every parameter.
void check_gradients(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto w = ModelWeights::init(spec, seed);
  const auto batch = random_batch(spec, rng);
  const ModelOptions opts;
  StashBuffer stash;
  const QuantContext ctx{PrecisionConfig::reference(), nullptr, &stash, nullptr, nullptr};
  const auto step = forward_backward(spec, w, batch, ctx, opts);
  CHECK(stash.empty());

  const auto names = w.names();
  const auto grads = step.grads.tensors();
  for (std::size_t t = 0; t < names.size(); ++t) {
    auto probe = w;
    Tensor& target = *probe.tensors()[t];
    const Tensor original = target;
    const auto loss = [&](const Tensor& x) {
      target = x;
      return forward(spec, probe, batch, QuantContext{}, opts).loss;
    };
    const auto fd = oracle::central_difference(loss, original);
    target = original;
    INFO(names[t]);
    CHECK(oracle::relative_error(*grads[t], fd, 1e-8) < 1e-6);
  }
}

}  // namespace

TEST_CASE("whole-model gradients match finite differences at Reference") {
  check_gradients({1, 8, 2, 12, 6, 4, 2}, 11);
  check_gradients({2, 6, 3, 10, 5, 3, 2}, 12);
}

TEST_CASE("a model without blocks is a linear readout") {
  const ModelSpec spec{0, 8, 2, 16, 5, 3, 2};
  check_gradients(spec, 13);
  const auto w = ModelWeights::init(spec, 1);
  CHECK(w.blocks.empty());
  const auto names = w.names();
  CHECK(names.size() == w.tensors().size());
  std::size_t gemm_weights = 0;
  for (bool g : w.gemm_mask()) gemm_weights += g;
  CHECK(gemm_weights == 1);
}

TEST_CASE("parameter layout") {
  const auto spec = ModelSpec::toy();
  const auto w = ModelWeights::init(spec, 1);
  CHECK(w.blocks.size() == 2);
  CHECK(w.token_embedding.shape() == std::vector<std::size_t>{32, 64});
  CHECK(w.output.shape() == std::vector<std::size_t>{64, 32});
  std::size_t gemm_weights = 0;
  for (bool g : w.gemm_mask()) gemm_weights += g;
  CHECK(gemm_weights == 6 * 2 + 1);
  const auto z = ModelWeights::zeros_like(w);
  for (const auto* t : z.tensors())
    for (double v : t->data()) REQUIRE(v == 0.0);
  CHECK_THROWS_AS(ModelWeights::init({1, 10, 3, 8, 5, 4, 2}, 1), ConfigError);
}

TEST_CASE("forward and backward are deterministic") {
  const ModelSpec spec{2, 16, 2, 32, 8, 6, 4};
  std::mt19937_64 rng(3);
  const auto batch = random_batch(spec, rng);
  const auto w1 = ModelWeights::init(spec, 99), w2 = ModelWeights::init(spec, 99);
  CHECK(w1.output == w2.output);
  const auto table = UnitCostTable::defaults();
  const auto profile = TrafficProfile::default_profile();
  const auto cfg = PrecisionConfig::of(FormatKind::Bfp, 16, 4, 4, 16);
  CostLedger l1, l2;
  StashBuffer s1, s2;
  const auto a = forward_backward(spec, w1, batch, {cfg, &l1, &s1, &table, &profile}, {});
  const auto b = forward_backward(spec, w2, batch, {cfg, &l2, &s2, &table, &profile}, {});
  CHECK(a.loss == b.loss);
  CHECK(a.grads.output == b.grads.output);
  CHECK(l1 == l2);
  CHECK(std::isfinite(a.loss));
  CHECK(forward(spec, w1, batch, {cfg}, {}).loss == a.loss);
}

TEST_CASE("token accuracy") {
  Tensor logits = Tensor::matrix(3, 2, {0.0, 1.0, 2.0, 1.0, 0.5, 0.4});
  const std::vector<int> targets{1, 0, 1};
  CHECK(token_accuracy(logits, targets) == doctest::Approx(2.0 / 3.0));
}
