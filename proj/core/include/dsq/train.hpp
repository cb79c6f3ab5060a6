#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsq/costmodel.hpp"
#include "dsq/model.hpp"
#include "dsq/optim.hpp"
#include "dsq/scheduler.hpp"
#include "dsq/task.hpp"

namespace dsq {

/// Either one static config for the whole run or a DSQ ladder.
struct PrecisionPlan {
  PrecisionConfig fixed = PrecisionConfig::reference();
  std::optional<ScheduleLadder> ladder;

  static PrecisionPlan static_config(const PrecisionConfig& cfg) { return {cfg, std::nullopt}; }
  static PrecisionPlan schedule(ScheduleLadder l) { return {l.configs.empty() ? PrecisionConfig{} : l.configs.front(), std::move(l)}; }
  bool is_schedule() const { return ladder.has_value(); }
};

struct TrainOptions {
  int epochs = 10;
  std::uint64_t seed = 1;
  double base_lr = 1.0;
  std::int64_t warmup = 100;
  ModelOptions model;
  AdamOptions adam;
  double divergence_factor = 10.0;  // loss above factor x initial counts as diverged
  int divergence_window = 3;        // consecutive evaluations before "Failed"
  bool abort_on_failure = true;
};

struct EpochMetrics {
  int epoch = 0;
  std::int64_t step = 0;
  double train_loss = 0.0;  // mean over the epoch's steps; NaN for epoch 0
  double valid_loss = 0.0;
  double token_accuracy = 0.0;
  PrecisionConfig config;  // config the epoch trained with (epoch 0: the initial one)
  int rung = -1;           // ladder position, -1 for static runs
  CostLedger ledger;       // cumulative
};

struct DivergenceEvent {
  std::int64_t step = 0;
  int epoch = 0;
  PrecisionConfig config;
  std::string reason;
};

struct RunReport {
  std::string method;
  ModelSpec spec;
  CopyVariant variant = CopyVariant::Copy;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  CostLedger ledger;
  std::vector<TraceEntry> trace;
  std::vector<DivergenceEvent> events;
  std::string verdict = "Completed";  // or "Failed"
  std::int64_t steps = 0;

  bool failed() const { return verdict == "Failed"; }
  double final_accuracy() const { return epochs.empty() ? 0.0 : epochs.back().token_accuracy; }
  double final_valid_loss() const { return epochs.empty() ? 0.0 : epochs.back().valid_loss; }
};

/// Trains `spec` on `task` from scratch. Every training step is accounted in
/// the ledger (GEMMs, DRAM traffic, optimizer traffic); evaluation passes are
/// not. Each epoch walks the training split in a seeded shuffle using only
/// full batches. Deterministic for a given seed.
RunReport train_run(const ModelSpec& spec, const CopyTask& task, const PrecisionPlan& plan,
                    const TrainOptions& opts, const UnitCostTable& table = UnitCostTable::defaults(),
                    const TrafficProfile& profile = TrafficProfile::default_profile(),
                    const std::string& method = "");

/// Loss and token accuracy of `w` on `data` under `cfg`, without accounting.
std::pair<double, double> evaluate(const ModelSpec& spec, const ModelWeights& w, const Dataset& data,
                                   const PrecisionConfig& cfg, const ModelOptions& opts);

/// One JSON object per epoch record, newline-terminated.
std::string metrics_jsonl(const RunReport& report);
/// Final summary: verdict, final metrics, ledger, trace and events.
std::string summary_json(const RunReport& report);
std::string ledger_json(const CostLedger& ledger);

}  // namespace dsq
