#include "dsq/qlayers.hpp"

#include "dsq/engine.hpp"
#include "dsq/error.hpp"

namespace dsq {

void StashBuffer::put(const std::string& key, Tensor value, const NumberFormat& format) {
  if (records_.contains(key)) throw ContractViolation("activation for '" + key + "' stashed twice in one step");
  const auto bits = dsq::storage_bits(format, static_cast<std::int64_t>(value.size()));
  records_.emplace(key, StashRecord{std::move(value), format, bits});
  ++writes_;
  bits_written_ += bits;
}

StashRecord StashBuffer::take(const std::string& key) {
  auto it = records_.find(key);
  if (it == records_.end()) throw ContractViolation("no stashed activation for '" + key + "'");
  StashRecord rec = std::move(it->second);
  records_.erase(it);
  ++reads_;
  return rec;
}

namespace {

auto n_of(const Tensor& t) { return static_cast<std::int64_t>(t.size()); }

struct Accountant {
  const QuantContext& ctx;

  bool on() const { return ctx.ledger != nullptr; }

  void gemm(std::size_t m, std::size_t n, std::size_t k, const NumberFormat& a, const NumberFormat& b) const {
    if (!on()) return;
    record_gemm(*ctx.ledger, static_cast<std::int64_t>(m), static_cast<std::int64_t>(n),
                static_cast<std::int64_t>(k), a, b, *ctx.table);
  }

  void dram(TensorClass c, std::int64_t n, Direction d) const {
    if (!on()) return;
    const auto fmt = c == TensorClass::Stash     ? ctx.cfg.q1
                     : c == TensorClass::ActGrad ? ctx.cfg.q3
                                                 : ctx.profile->format_for(c, ctx.cfg);
    record_dram(*ctx.ledger, c, n, fmt, d, *ctx.profile, *ctx.table);
  }
};

void require_accounting(const QuantContext& ctx) {
  if (ctx.ledger && (!ctx.table || !ctx.profile))
    throw ContractViolation("a ledger needs a unit-cost table and a traffic profile");
}

StashBuffer& require_stash(const QuantContext& ctx) {
  if (!ctx.stash) throw ContractViolation("backward pass needs a stash buffer");
  return *ctx.stash;
}

}  // namespace

Tensor linear_forward(const Tensor& x, const Tensor& w, const QuantContext& ctx, const std::string& key) {
  require_accounting(ctx);
  const auto& cfg = ctx.cfg;
  Tensor y = gemm(quantize_tensor(x, cfg.q0, BoxAxis::Rows), quantize_tensor(w, cfg.q0, BoxAxis::Columns));
  if (ctx.stash) ctx.stash->put(key, quantize_tensor(x, cfg.q1, BoxAxis::Columns), cfg.q1);

  const Accountant acc{ctx};
  acc.gemm(x.dim(0), w.dim(1), x.dim(1), cfg.q0, cfg.q0);
  acc.dram(TensorClass::Activation, n_of(x), Direction::Read);
  acc.dram(TensorClass::Weight, n_of(w), Direction::Read);
  acc.dram(TensorClass::Activation, n_of(y), Direction::Write);
  if (ctx.stash) acc.dram(TensorClass::Stash, n_of(x), Direction::Write);
  return y;
}

LinearGrads linear_backward(const Tensor& dy, const Tensor& w, const QuantContext& ctx, const std::string& key) {
  require_accounting(ctx);
  const auto& cfg = ctx.cfg;
  if (dy.rank() != 2 || dy.dim(1) != w.dim(1))
    throw ContractViolation("linear_backward: gradient " + dy.shape_string() + " does not match weight " +
                            w.shape_string());
  StashRecord x = require_stash(ctx).take(key);
  if (x.value.dim(0) != dy.dim(0)) throw ContractViolation("linear_backward: stash/gradient row mismatch");

  const Accountant acc{ctx};
  acc.dram(TensorClass::ActGrad, n_of(dy), Direction::Read);

  // input gradient: reduction over the output features, i.e. along rows of dy and w
  acc.dram(TensorClass::Weight, n_of(w), Direction::Read);
  Tensor dx = gemm_nt(quantize_tensor(dy, cfg.q2, BoxAxis::Rows), quantize_tensor(w, cfg.q0, BoxAxis::Rows));
  acc.gemm(dy.dim(0), w.dim(0), w.dim(1), cfg.q2, cfg.q0);
  dx = quantize_tensor(dx, cfg.q3, BoxAxis::Rows);
  acc.dram(TensorClass::ActGrad, n_of(dx), Direction::Write);

  // weight gradient: reduction over tokens, i.e. down the columns of x and dy
  acc.dram(TensorClass::Stash, n_of(x.value), Direction::Read);
  Tensor dw = gemm_tn(x.value, quantize_tensor(dy, cfg.q3, BoxAxis::Columns));
  acc.gemm(w.dim(0), w.dim(1), dy.dim(0), cfg.q1, cfg.q3);
  acc.dram(TensorClass::WeightGrad, n_of(dw), Direction::Write);
  return {std::move(dx), std::move(dw)};
}

Tensor matmul_forward(const Tensor& a, const Tensor& b, const QuantContext& ctx, const std::string& key) {
  require_accounting(ctx);
  const auto& cfg = ctx.cfg;
  Tensor y = gemm(quantize_tensor(a, cfg.q0, BoxAxis::Rows), quantize_tensor(b, cfg.q0, BoxAxis::Columns));
  if (ctx.stash) {
    ctx.stash->put(key + ".lhs", quantize_tensor(a, cfg.q1, BoxAxis::Columns), cfg.q1);
    ctx.stash->put(key + ".rhs", quantize_tensor(b, cfg.q1, BoxAxis::Rows), cfg.q1);
  }

  const Accountant acc{ctx};
  acc.gemm(a.dim(0), b.dim(1), a.dim(1), cfg.q0, cfg.q0);
  acc.dram(TensorClass::Activation, n_of(a), Direction::Read);
  acc.dram(TensorClass::Activation, n_of(b), Direction::Read);
  acc.dram(TensorClass::Activation, n_of(y), Direction::Write);
  if (ctx.stash) {
    acc.dram(TensorClass::Stash, n_of(a), Direction::Write);
    acc.dram(TensorClass::Stash, n_of(b), Direction::Write);
  }
  return y;
}

MatmulGrads matmul_backward(const Tensor& dy, const QuantContext& ctx, const std::string& key) {
  require_accounting(ctx);
  const auto& cfg = ctx.cfg;
  auto& stash = require_stash(ctx);
  StashRecord a = stash.take(key + ".lhs");
  StashRecord b = stash.take(key + ".rhs");
  if (dy.rank() != 2 || dy.dim(0) != a.value.dim(0) || dy.dim(1) != b.value.dim(1))
    throw ContractViolation("matmul_backward: gradient " + dy.shape_string() + " does not match operands");

  const Accountant acc{ctx};
  acc.dram(TensorClass::ActGrad, n_of(dy), Direction::Read);

  acc.dram(TensorClass::Stash, n_of(b.value), Direction::Read);
  Tensor da = gemm_nt(quantize_tensor(dy, cfg.q2, BoxAxis::Rows), b.value);
  acc.gemm(dy.dim(0), b.value.dim(0), b.value.dim(1), cfg.q2, cfg.q1);
  da = quantize_tensor(da, cfg.q3, BoxAxis::Rows);
  acc.dram(TensorClass::ActGrad, n_of(da), Direction::Write);

  acc.dram(TensorClass::Stash, n_of(a.value), Direction::Read);
  Tensor db = gemm_tn(a.value, quantize_tensor(dy, cfg.q3, BoxAxis::Columns));
  acc.gemm(a.value.dim(1), dy.dim(1), dy.dim(0), cfg.q1, cfg.q3);
  db = quantize_tensor(db, cfg.q3, BoxAxis::Rows);
  acc.dram(TensorClass::ActGrad, n_of(db), Direction::Write);
  return {std::move(da), std::move(db)};
}

}  // namespace dsq
