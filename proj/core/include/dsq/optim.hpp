#pragma once

#include <cstdint>
#include <vector>

#include "dsq/costmodel.hpp"
#include "dsq/model.hpp"

namespace dsq {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double weight_decay = 0.0;
  double grad_clip = 0.0;  // global L2 norm clip, disabled when 0
};

/// Adam with bias correction. Moments live at Reference precision.
class Adam {
 public:
  Adam(const ModelWeights& like, AdamOptions opts = {});

  /// One update with learning rate `lr`. Throws NumericError on a non-finite
  /// gradient; the weights are left untouched in that case.
  void step(ModelWeights& w, const ModelWeights& grads, double lr);

  std::int64_t steps() const { return t_; }
  const AdamOptions& options() const { return opts_; }

 private:
  AdamOptions opts_;
  ModelWeights m_, v_;
  std::int64_t t_ = 0;
};

/// Inverse-square-root schedule with linear warm-up:
/// base * min(step^-1/2, step * warmup^-3/2). `step` counts from 1.
double lr_schedule(std::int64_t step, std::int64_t warmup, double base);

/// Optimizer-side DRAM traffic of one update for the GEMM weights of `w`:
/// each weight gradient is read once, weight and both moments are read and
/// written back, all at Reference width.
void record_optimizer_traffic(CostLedger& ledger, const ModelWeights& w, const TrafficProfile& profile,
                              const UnitCostTable& table);

double global_norm(const ModelWeights& grads);

}  // namespace dsq
