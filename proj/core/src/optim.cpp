#include "dsq/optim.hpp"

#include <cmath>

#include "dsq/error.hpp"

namespace dsq {

Adam::Adam(const ModelWeights& like, AdamOptions opts)
    : opts_(opts), m_(ModelWeights::zeros_like(like)), v_(ModelWeights::zeros_like(like)) {
  if (!(opts.beta1 >= 0.0 && opts.beta1 < 1.0) || !(opts.beta2 >= 0.0 && opts.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(opts.eps > 0.0)) throw ConfigError("Adam eps must be positive");
  if (opts.weight_decay < 0.0 || opts.grad_clip < 0.0) throw ConfigError("weight decay and clip must be >= 0");
}

double global_norm(const ModelWeights& grads) {
  double sq = 0.0;
  for (const auto* t : grads.tensors())
    for (double g : t->data()) sq += g * g;
  return std::sqrt(sq);
}

void Adam::step(ModelWeights& w, const ModelWeights& grads, double lr) {
  const auto ws = w.tensors();
  const auto gs = grads.tensors();
  const auto ms = m_.tensors();
  const auto vs = v_.tensors();
  if (ws.size() != gs.size() || ws.size() != ms.size()) throw ContractViolation("Adam: parameter layout changed");
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (ws[i]->shape() != gs[i]->shape() || ws[i]->shape() != ms[i]->shape())
      throw ContractViolation("Adam: parameter shape changed");
  }

  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient");
  const double clip = opts_.grad_clip > 0.0 && norm > opts_.grad_clip ? opts_.grad_clip / norm : 1.0;

  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < ws.size(); ++i) {
    auto wd = ws[i]->data();
    const auto gd = gs[i]->data();
    auto md = ms[i]->data();
    auto vd = vs[i]->data();
    for (std::size_t j = 0; j < wd.size(); ++j) {
      const double g = gd[j] * clip;
      md[j] = opts_.beta1 * md[j] + (1.0 - opts_.beta1) * g;
      vd[j] = opts_.beta2 * vd[j] + (1.0 - opts_.beta2) * g * g;
      const double update = (md[j] / c1) / (std::sqrt(vd[j] / c2) + opts_.eps);
      wd[j] -= lr * (update + opts_.weight_decay * wd[j]);
    }
  }
}

double lr_schedule(std::int64_t step, std::int64_t warmup, double base) {
  if (step < 1) throw ContractViolation("lr_schedule: step counts from 1");
  if (warmup < 1) throw ConfigError("warm-up must be at least one step");
  const auto s = static_cast<double>(step);
  const auto wu = static_cast<double>(warmup);
  return base * std::min(1.0 / std::sqrt(s), s * std::pow(wu, -1.5));
}

void record_optimizer_traffic(CostLedger& ledger, const ModelWeights& w, const TrafficProfile& profile,
                              const UnitCostTable& table) {
  const auto ref = NumberFormat::reference();
  const auto ts = w.tensors();
  const auto mask = w.gemm_mask();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!mask[i]) continue;
    const auto n = static_cast<std::int64_t>(ts[i]->size());
    record_dram(ledger, TensorClass::WeightGrad, n, ref, Direction::Read, profile, table);
    record_dram(ledger, TensorClass::Optimizer, 3 * n, ref, Direction::Read, profile, table);
    record_dram(ledger, TensorClass::Optimizer, 3 * n, ref, Direction::Write, profile, table);
  }
}

}  // namespace dsq
