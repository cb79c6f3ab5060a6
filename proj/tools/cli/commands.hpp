#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "csv.hpp"
#include "run_config.hpp"

namespace dsq::cli {

/// One cost row as produced by `estimate`.
struct EstimateRow {
  std::string method;
  std::string setup;
  CostRatios ratios;
  CostLedger ledger;  // one training step
  std::vector<double> fractions;  // dsq only
  double residual = 0.0;          // dsq only
};

/// The default table: floating-point, fixed 32/16, bfp 32/16, both
/// stashing setups and the dsq ladder, on cfg.estimate_model.
std::vector<EstimateRow> default_estimate_rows(const RunConfig& cfg);
/// A single row for cfg.method / cfg.plan.
EstimateRow estimate_row(const RunConfig& cfg);
std::vector<CsvRow> estimate_csv_rows(const std::vector<EstimateRow>& rows);

/// Training artifacts: metrics.jsonl, summary.json, costs.csv in cfg.out_dir.
RunReport cmd_train(const RunConfig& cfg, std::ostream& log);
/// Writes estimate.csv to cfg.out_dir and echoes it to `out`.
/// `all_rows` selects the default table instead of the configured method.
void cmd_estimate(const RunConfig& cfg, bool all_rows, std::ostream& out);
/// Trains each grid setup and writes sweep.csv; failed runs become rows.
void cmd_sweep(const RunConfig& cfg, std::ostream& log);
/// Renders loss.svg from cfg.out_dir/metrics.jsonl (when present) and
/// roofline.svg from the default estimate table.
void cmd_report(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point. Returns the process exit status:
/// 0 success, 2 configuration error, 1 anything else.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dsq::cli
