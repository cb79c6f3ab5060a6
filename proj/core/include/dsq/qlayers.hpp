#pragma once

#include <map>
#include <string>

#include "dsq/costmodel.hpp"
#include "dsq/formats.hpp"
#include "dsq/precision.hpp"
#include "dsq/tensor.hpp"

namespace dsq {

struct StashRecord {
  Tensor value;        // already snapped to `format`
  NumberFormat format;
  std::int64_t bits_written = 0;  // storage_bits(format, value.size())
};

/// Forward activations retained for the backward pass. Each key is written
/// once per forward pass and consumed once per backward pass.
class StashBuffer {
 public:
  /// Throws ContractViolation if `key` is already held.
  void put(const std::string& key, Tensor value, const NumberFormat& format);
  /// Removes and returns the record; throws ContractViolation if absent.
  StashRecord take(const std::string& key);

  bool contains(const std::string& key) const { return records_.contains(key); }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::int64_t writes() const { return writes_; }
  std::int64_t reads() const { return reads_; }
  std::int64_t bits_written() const { return bits_written_; }

 private:
  std::map<std::string, StashRecord> records_;
  std::int64_t writes_ = 0;
  std::int64_t reads_ = 0;
  std::int64_t bits_written_ = 0;
};

/// Everything a quantized GEMM site needs besides its operands. `ledger`
/// and `stash` may be null for inference-only passes (no accounting, no
/// backward).
struct QuantContext {
  PrecisionConfig cfg = PrecisionConfig::reference();
  CostLedger* ledger = nullptr;
  StashBuffer* stash = nullptr;
  const UnitCostTable* table = nullptr;
  const TrafficProfile* profile = nullptr;
};

/// y = Q(x, q0) * Q(w, q0). Stashes Q(x, q1) under `key`.
///
/// Bfp boxes follow each GEMM's reduction dimension: x along its rows, w
/// down its columns. The stashed copy is boxed down the columns of x since
/// its only consumer is the weight-gradient GEMM, which reduces over tokens.
Tensor linear_forward(const Tensor& x, const Tensor& w, const QuantContext& ctx, const std::string& key);

struct LinearGrads {
  Tensor dx;  // already snapped to q3: this is what the layer below reads back
  Tensor dw;  // Reference precision
};

/// dx = Q(Q(dy, q2) * Q(w, q0)^T, q3), dw = stash(x, q1)^T * Q(dy, q3).
/// The input gradient is flushed to DRAM at q3 unconditionally.
LinearGrads linear_backward(const Tensor& dy, const Tensor& w, const QuantContext& ctx, const std::string& key);

/// y = Q(a, q0) * Q(b, q0) for two activations (attention). Both operands
/// are stashed at q1 under `key`.lhs / `key`.rhs.
Tensor matmul_forward(const Tensor& a, const Tensor& b, const QuantContext& ctx, const std::string& key);

struct MatmulGrads {
  Tensor da;  // snapped to q3
  Tensor db;  // snapped to q3
};

/// da = Q(Q(dy, q2) * stash(b)^T, q3), db = Q(stash(a)^T * Q(dy, q3), q3).
MatmulGrads matmul_backward(const Tensor& dy, const QuantContext& ctx, const std::string& key);

}  // namespace dsq
