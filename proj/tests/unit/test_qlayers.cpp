#include <random>

#include "doctest.h"
#include "dsq/error.hpp"
#include "dsq/engine.hpp"
#include "dsq/qlayers.hpp"
#include "oracles.hpp"

using namespace dsq;

namespace {

// Boxes of 16 along rows (contiguous) or down columns, snapped by the oracle.
Tensor oracle_bfp(const Tensor& t, int bits, bool by_columns) {
  Tensor out = t;
  const std::size_t R = t.rows(), C = t.cols();
  if (!by_columns) {
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c0 = 0; c0 < C; c0 += 16) {
        const std::size_t n = std::min<std::size_t>(16, C - c0);
        const auto s = oracle::snap_bfp(t.data().subspan(r * C + c0, n), bits, 8);
        for (std::size_t i = 0; i < n; ++i) out(r, c0 + i) = s[i];
      }
    return out;
  }
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t r0 = 0; r0 < R; r0 += 16) {
      const std::size_t n = std::min<std::size_t>(16, R - r0);
      std::vector<double> lane(n);
      for (std::size_t i = 0; i < n; ++i) lane[i] = t(r0 + i, c);
      const auto s = oracle::snap_bfp(lane, bits, 8);
      for (std::size_t i = 0; i < n; ++i) out(r0 + i, c) = s[i];
    }
  return out;
}

struct Harness {
  CostLedger ledger;
  StashBuffer stash;
  UnitCostTable table = UnitCostTable::defaults();
  TrafficProfile profile = TrafficProfile::default_profile();
  QuantContext ctx(const PrecisionConfig& cfg) { return {cfg, &ledger, &stash, &table, &profile}; }
};

}  // namespace

TEST_CASE("Reference layers match plain GEMMs exactly") {
  std::mt19937_64 rng(5);
  const auto x = oracle::random_tensor({7, 20}, rng), w = oracle::random_tensor({20, 9}, rng);
  const auto dy = oracle::random_tensor({7, 9}, rng);
  Harness h;
  const auto ctx = h.ctx(PrecisionConfig::reference());
  CHECK(linear_forward(x, w, ctx, "l") == gemm(x, w));
  const auto g = linear_backward(dy, w, ctx, "l");
  CHECK(g.dx == gemm_nt(dy, w));
  CHECK(g.dw == gemm_tn(x, dy));
  CHECK(h.stash.empty());
}

TEST_CASE("values already on the grid pass through unchanged") {
  // small integers are exactly representable at 16-bit Bfp and Fixed
  Tensor x({4, 16}), w({16, 3});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(static_cast<int>(i % 7) - 3);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(static_cast<int>(i % 5) - 2);
  for (auto fam : {FormatKind::Fixed, FormatKind::Bfp}) {
    Harness h;
    CHECK(linear_forward(x, w, h.ctx(PrecisionConfig::of(fam, 16, 16, 16, 16)), "k") == gemm(x, w));
  }
}

TEST_CASE("bfp forward and backward follow the oracle composition") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 5 + trial, k = 17 + 3 * trial, n = 6 + trial % 5;
    const auto x = oracle::random_tensor({m, k}, rng, 3.0), w = oracle::random_tensor({k, n}, rng, 0.2);
    const auto dy = oracle::random_tensor({m, n}, rng, 1e-3);

    Harness f8;
    const auto y8 = linear_forward(x, w, f8.ctx(PrecisionConfig::of(FormatKind::Bfp, 8, 8, 8, 8)), "s");
    CHECK(y8 == oracle::naive_gemm(oracle_bfp(x, 8, false), oracle_bfp(w, 8, true)));

    Harness h;
    const auto ctx = h.ctx(PrecisionConfig::of(FormatKind::Bfp, 16, 4, 4, 16));
    const auto y = linear_forward(x, w, ctx, "s");
    CHECK(y == oracle::naive_gemm(oracle_bfp(x, 16, false), oracle_bfp(w, 16, true)));
    const auto g = linear_backward(dy, w, ctx, "s");
    const auto dx = oracle_bfp(
        oracle::naive_gemm(oracle_bfp(dy, 4, false), oracle::naive_transpose(oracle_bfp(w, 16, false))), 16, false);
    const auto dw = oracle::naive_gemm(oracle::naive_transpose(oracle_bfp(x, 4, true)), oracle_bfp(dy, 16, true));
    CHECK(oracle::relative_error(g.dx, dx) < 1e-14);
    CHECK(oracle::relative_error(g.dw, dw) < 1e-14);
  }
}

TEST_CASE("zero incoming gradient gives zero gradients") {
  std::mt19937_64 rng(2);
  const auto x = oracle::random_tensor({6, 16}, rng), w = oracle::random_tensor({16, 4}, rng);
  for (auto fam : {FormatKind::Fixed, FormatKind::Bfp}) {
    Harness h;
    const auto ctx = h.ctx(PrecisionConfig::of(fam, 8, 4, 4, 8));
    linear_forward(x, w, ctx, "z");
    const auto g = linear_backward(Tensor({6, 4}), w, ctx, "z");
    CHECK(g.dx == Tensor({6, 16}));
    CHECK(g.dw == Tensor({16, 4}));
  }
}

TEST_CASE("stash discipline") {
  std::mt19937_64 rng(3);
  const auto x = oracle::random_tensor({4, 8}, rng), w = oracle::random_tensor({8, 4}, rng);
  Harness h;
  const auto ctx = h.ctx(PrecisionConfig::of(FormatKind::Bfp, 16, 4, 4, 16));
  linear_forward(x, w, ctx, "a");
  CHECK_THROWS_AS(linear_forward(x, w, ctx, "a"), ContractViolation);
  linear_backward(Tensor({4, 4}, 1.0), w, ctx, "a");
  CHECK_THROWS_AS(linear_backward(Tensor({4, 4}, 1.0), w, ctx, "a"), ContractViolation);
  CHECK_THROWS_AS(linear_backward(Tensor({4, 4}, 1.0), w, ctx, "never"), ContractViolation);
  CHECK(h.stash.writes() == 1);
  CHECK(h.stash.reads() == 1);
  CHECK(h.stash.bits_written() == storage_bits(NumberFormat::bfp(4), 32));

  QuantContext no_stash = ctx;
  no_stash.stash = nullptr;
  CHECK_THROWS_AS(linear_backward(Tensor({4, 4}), w, no_stash, "a"), ContractViolation);
  QuantContext no_table = ctx;
  no_table.table = nullptr;
  CHECK_THROWS_AS(linear_forward(x, w, no_table, "b"), ContractViolation);
}

TEST_CASE("attention products stash both operands and flush both gradients") {
  std::mt19937_64 rng(4);
  const auto a = oracle::random_tensor({8, 4}, rng), b = oracle::random_tensor({4, 8}, rng);
  Harness h;
  const auto ctx = h.ctx(PrecisionConfig::of(FormatKind::Fixed, 16, 8, 8, 16));
  const auto y = matmul_forward(a, b, ctx, "att");
  CHECK(y.dim(0) == 8);
  CHECK(h.stash.size() == 2);
  const auto g = matmul_backward(oracle::random_tensor({8, 8}, rng), ctx, "att");
  CHECK(h.stash.empty());
  CHECK(g.da.shape() == a.shape());
  CHECK(g.db.shape() == b.shape());
  CHECK(h.ledger.transfer_count(TensorClass::Stash, Direction::Write) == 2);
  CHECK(h.ledger.transfer_count(TensorClass::Stash, Direction::Read) == 2);
  CHECK(h.ledger.transfer_count(TensorClass::ActGrad, Direction::Write) == 2);
  CHECK(h.ledger.gemms == 3);
  CHECK_THROWS_AS(matmul_backward(Tensor({8, 8}), ctx, "att"), ContractViolation);
}

TEST_CASE("every input gradient is flushed at q3, even when unused") {
  std::mt19937_64 rng(6);
  Harness h;
  const auto ctx = h.ctx(PrecisionConfig::of(FormatKind::Bfp, 16, 4, 4, 8));
  const int layers = 5;
  std::vector<Tensor> ws;
  Tensor x = oracle::random_tensor({4, 16}, rng);
  for (int l = 0; l < layers; ++l) {
    ws.push_back(oracle::random_tensor({16, 16}, rng, 0.25));
    x = linear_forward(x, ws.back(), ctx, "l" + std::to_string(l));
  }
  Tensor dy = Tensor({4, 16}, 0.01);
  for (int l = layers - 1; l >= 0; --l) dy = linear_backward(dy, ws[l], ctx, "l" + std::to_string(l)).dx;
  CHECK(h.ledger.transfer_count(TensorClass::ActGrad, Direction::Write) == layers);
  CHECK(h.ledger.bits(TensorClass::ActGrad, Direction::Write) ==
        doctest::Approx(layers * h.table.storage_bits(NumberFormat::bfp(8), 64)));
  // the last gradient is already on the q3 grid
  CHECK(quantize_tensor(dy, NumberFormat::bfp(8)) == dy);
}

TEST_CASE("each quantization point only affects its own tensors") {
  std::mt19937_64 rng(8);
  const auto x = oracle::random_tensor({6, 32}, rng), w = oracle::random_tensor({32, 5}, rng);
  const auto dy = oracle::random_tensor({6, 5}, rng);
  Harness r, q;
  const PrecisionConfig stash_only{NumberFormat::reference(), NumberFormat::bfp(4), NumberFormat::reference(),
                                   NumberFormat::reference()};
  const auto yr = linear_forward(x, w, r.ctx(PrecisionConfig::reference()), "p");
  const auto yq = linear_forward(x, w, q.ctx(stash_only), "p");
  CHECK(yr == yq);
  const auto gr = linear_backward(dy, w, r.ctx(PrecisionConfig::reference()), "p");
  const auto gq = linear_backward(dy, w, q.ctx(stash_only), "p");
  CHECK(gr.dx == gq.dx);
  CHECK_FALSE(gr.dw == gq.dw);
  CHECK(gq.dw == gemm_tn(quantize_tensor(x, NumberFormat::bfp(4), BoxAxis::Columns), dy));
}
