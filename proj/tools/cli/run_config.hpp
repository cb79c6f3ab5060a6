#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dsq/cost_io.hpp"
#include "dsq/costmodel.hpp"
#include "dsq/train.hpp"

namespace dsq::cli {

enum class Method { FloatingPoint, Fixed, Bfp, StashingFixed, StashingBfp, Dsq };

std::string method_name(Method m);
Method parse_method(const std::string& name);
/// Number family a method quantizes with (Reference for floating-point).
FormatKind method_family(Method m);
bool is_static(Method m);

/// Values given on the command line; they win over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::string> method;
  std::optional<std::string> setup;
  std::optional<std::filesystem::path> ladder;
};

/// Fully resolved experiment description. See README for the file schema.
struct RunConfig {
  Method method = Method::FloatingPoint;
  PrecisionPlan plan;

  ModelSpec model = ModelSpec::toy();
  ModelSpec estimate_model = ModelSpec::transformer_6l();
  CopyVariant variant = CopyVariant::Copy;
  std::size_t samples = 640;
  double valid_fraction = 0.1;
  std::uint64_t task_seed = 1;
  TrainOptions train;

  std::filesystem::path cost_table_path;
  UnitCostTable table = UnitCostTable::defaults();
  TrafficProfile profile = TrafficProfile::default_profile();

  CostRatios dsq_target{0.012, 0.20};
  std::vector<double> dsq_fractions;  // empty: fit against dsq_target
  ScheduleLadder estimate_ladder = default_ladder(FormatKind::Bfp);

  Method sweep_method = Method::Fixed;
  std::vector<PrecisionConfig> sweep_grid;

  double peak_ops = 1e12;    // MAC/s, roofline only
  double bandwidth = 1e11;   // bytes/s, roofline only

  std::filesystem::path out_dir;

  /// "[16, 4, 4, 16]", or the ladder rungs joined with " > " for dsq.
  std::string setup_label() const;
};

/// Reads and validates a run config. Missing path means all defaults.
/// Throws ConfigError on unknown sections/keys, bad values and invalid
/// method/precision combinations.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides = {});
RunConfig make_run_config(const IniSections& sections, const Overrides& overrides = {});

/// Parses "2,2,2,16; 4,4,4,16" style rung lists.
std::vector<PrecisionConfig> parse_setup_list(const std::string& text, FormatKind family);
/// Reads a `[ladder]` file: family, rungs, patience, min_delta.
ScheduleLadder load_ladder(const std::filesystem::path& path);
ScheduleLadder ladder_from(const KeyValues& kv);

/// Output directory when neither --out nor [run] out is set: $DSQ_OUT_DIR,
/// else "dsq-out".
std::filesystem::path default_out_dir();

}  // namespace dsq::cli
