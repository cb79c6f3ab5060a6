#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dsq/formats.hpp"
#include "dsq/model_spec.hpp"
#include "dsq/precision.hpp"

namespace dsq {

enum class TensorClass { Activation, Weight, Stash, ActGrad, WeightGrad, Optimizer };
enum class Direction { Read, Write };

inline constexpr std::array<TensorClass, 6> kTensorClasses = {
    TensorClass::Activation, TensorClass::Weight,     TensorClass::Stash,
    TensorClass::ActGrad,    TensorClass::WeightGrad, TensorClass::Optimizer};

std::string class_name(TensorClass c);   // "activation", "act_grad", ...
TensorClass parse_class(const std::string& name);
std::string direction_name(Direction d);

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

/// Accumulated arithmetic and DRAM cost. Entries only ever grow; merging is
/// plain addition, so it is associative and commutative up to rounding.
struct CostLedger {
  double mac_units = 0.0;  // MACs weighted by UnitCostTable (fixed-32 MAC == 1)
  double macs = 0.0;       // raw multiply-accumulate count
  std::int64_t gemms = 0;
  std::array<std::array<double, 2>, 6> dram_bits{};
  std::array<std::array<std::int64_t, 2>, 6> transfers{};

  double bits(TensorClass c, Direction d) const {
    return dram_bits[static_cast<int>(c)][static_cast<int>(d)];
  }
  std::int64_t transfer_count(TensorClass c, Direction d) const {
    return transfers[static_cast<int>(c)][static_cast<int>(d)];
  }
  double total_dram_bits() const;
  bool empty() const;

  CostLedger& operator+=(const CostLedger& other);
  friend CostLedger operator+(CostLedger a, const CostLedger& b) { return a += b; }
  /// Multiplies every quantity by `k`; counts are rounded to the nearest integer.
  CostLedger scaled(double k) const;

  friend bool operator==(const CostLedger&, const CostLedger&) = default;
};

// ---------------------------------------------------------------------------
// Unit costs
// ---------------------------------------------------------------------------

/// Per-MAC cost in units of a 32x32-bit fixed-point MAC, and per-element
/// storage widths.
///
/// Lookup order for mac_cost(a, b):
///   1. an explicit pair entry for (family, bits_a, bits_b), symmetric;
///   2. both Fixed: bits_a * bits_b / 1024;
///   3. otherwise sqrt(diag(a) * diag(b)), where diag(Fixed b) = b*b/1024,
///      diag(Reference) = the reference entry and diag(Bfp b) must be in
///      the table. Missing entries raise ConfigError.
class UnitCostTable {
 public:
  /// Calibrated so the six static rows printed by `estimate` hit their
  /// target ratios on the six-layer model (see the README design notes).
  static UnitCostTable defaults();
  /// Fixed-point formula, Reference == 1, no Bfp entries, no storage overrides.
  static UnitCostTable formula_only();

  double mac_cost(const NumberFormat& a, const NumberFormat& b) const;
  /// Storage for n elements: override * n when one exists, else storage_bits().
  double storage_bits(const NumberFormat& fmt, std::int64_t n) const;

  void set_diagonal(FormatKind kind, int bits, double cost);
  void set_pair(FormatKind kind, int bits_a, int bits_b, double cost);
  void set_storage(FormatKind kind, int bits, double bits_per_element);
  void set_reference_cost(double cost) { reference_cost_ = cost; }
  void clear_storage_overrides() { storage_.clear(); }

  std::optional<double> diagonal(FormatKind kind, int bits) const;
  std::optional<double> storage_override(FormatKind kind, int bits) const;

  /// Checks mac_cost(Fixed32, Fixed32) == 1, positivity and pair symmetry.
  void validate() const;

  const std::map<std::pair<FormatKind, int>, double>& diagonals() const { return diag_; }
  const std::map<std::tuple<FormatKind, int, int>, double>& pairs() const { return pairs_; }
  const std::map<std::pair<FormatKind, int>, double>& storage_overrides() const { return storage_; }
  double reference_cost() const { return reference_cost_; }

 private:
  double diag_cost(const NumberFormat& f) const;

  double reference_cost_ = 1.0;
  std::map<std::pair<FormatKind, int>, double> diag_;
  std::map<std::tuple<FormatKind, int, int>, double> pairs_;  // bits_a <= bits_b
  std::map<std::pair<FormatKind, int>, double> storage_;
};

// ---------------------------------------------------------------------------
// Traffic profile
// ---------------------------------------------------------------------------

enum class WidthSource { Q0, Q1, Q2, Q3, Reference };

std::string width_source_name(WidthSource w);
WidthSource parse_width_source(const std::string& s);

struct ClassRule {
  bool read = false;
  bool write = false;
  WidthSource width = WidthSource::Reference;
};

/// Which transfers count towards the DRAM total and at which width.
///
/// The default counts every GEMM output once when it is produced
/// (activation writes at q0, input-gradient flushes at q3), weight fetches
/// for both the forward and the input-gradient GEMM at q0, and the stash in
/// both directions at q1. Consumer-side re-reads of activations and
/// gradients, weight gradients and optimizer state are recorded by the
/// simulator but excluded.
struct TrafficProfile {
  std::array<ClassRule, 6> rules{};

  static TrafficProfile default_profile();
  /// Every class in both directions (weight-grad/optimizer at Reference).
  static TrafficProfile everything();

  const ClassRule& rule(TensorClass c) const { return rules[static_cast<int>(c)]; }
  ClassRule& rule(TensorClass c) { return rules[static_cast<int>(c)]; }
  bool includes(TensorClass c, Direction d) const;
  NumberFormat format_for(TensorClass c, const PrecisionConfig& cfg) const;

  /// Stash must be sourced from q1 and act-grad from q3.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Recording
// ---------------------------------------------------------------------------

/// mac_units += M*N*K * mac_cost(a, b).
void record_gemm(CostLedger& ledger, std::int64_t m, std::int64_t n, std::int64_t k,
                 const NumberFormat& a, const NumberFormat& b, const UnitCostTable& table);

/// Adds the storage of n elements of `fmt` when the profile includes
/// (tensor_class, direction); otherwise leaves the ledger untouched.
void record_dram(CostLedger& ledger, TensorClass tensor_class, std::int64_t n_elements,
                 const NumberFormat& fmt, Direction direction, const TrafficProfile& profile,
                 const UnitCostTable& table);
/// Same, using storage_bits() without table overrides.
void record_dram(CostLedger& ledger, TensorClass tensor_class, std::int64_t n_elements,
                 const NumberFormat& fmt, Direction direction, const TrafficProfile& profile);

// ---------------------------------------------------------------------------
// Static estimation
// ---------------------------------------------------------------------------

/// One GEMM site of a training step. A weight site multiplies an activation
/// by a parameter matrix; an activation site multiplies two activations
/// (attention scores and attention-weighted values), and `count` is the
/// number of (sequence, head) instances.
struct GemmSite {
  std::string name;
  std::int64_t m = 0, k = 0, n = 0;
  bool rhs_is_weight = true;
  std::int64_t count = 1;
};

/// Every GEMM executed by one training step of `spec`, in execution order.
std::vector<GemmSite> enumerate_gemms(const ModelSpec& spec);

/// Adds one site's forward, input-gradient and weight-gradient GEMMs plus all
/// its transfers, following the same routing as the quantized layers.
void account_site(CostLedger& ledger, const GemmSite& site, const PrecisionConfig& cfg,
                  const UnitCostTable& table, const TrafficProfile& profile);

/// Cost of `steps` identical training steps at a fixed precision config.
CostLedger estimate_static(const ModelSpec& spec, const PrecisionConfig& cfg, std::int64_t steps,
                           const UnitCostTable& table, const TrafficProfile& profile);

/// Cost of a schedule given the number of steps spent on each rung.
CostLedger estimate_schedule(const ModelSpec& spec, const std::vector<PrecisionConfig>& rungs,
                             const std::vector<std::int64_t>& steps_per_rung,
                             const UnitCostTable& table, const TrafficProfile& profile);

struct CostRatios {
  double arith = 0.0;
  double dram = 0.0;
};

/// (ledger / baseline) for arithmetic units and total DRAM bits.
CostRatios normalize(const CostLedger& ledger, const CostLedger& baseline);

/// The fixed-point 32-bit config all ratios are normalised against.
PrecisionConfig baseline_config();

struct RooflinePoint {
  double operational_intensity = 0.0;  // MACs per DRAM byte
  double attainable = 0.0;             // MAC/s
};

RooflinePoint roofline(const CostLedger& ledger, double peak_ops_per_sec,
                       double bandwidth_bytes_per_sec);

struct PhaseFit {
  std::vector<double> fractions;  // one per rung, on the simplex
  CostRatios ratios;              // ratios achieved by `fractions`
  double residual = 0.0;          // Euclidean distance to the target
};

/// Finds time fractions over the rungs of a ladder whose blended cost ratios
/// (against the fixed-32 baseline) come closest to `target`. Exact: every
/// support set is solved as an equality-constrained least-squares problem
/// and the best feasible one wins.
PhaseFit fit_phase_durations(const UnitCostTable& table, const ModelSpec& spec,
                             const std::vector<PrecisionConfig>& rungs, CostRatios target,
                             const TrafficProfile& profile);

/// Blends per-rung per-step ledgers by `fractions` for a run of `steps`.
CostLedger blend_rungs(const ModelSpec& spec, const std::vector<PrecisionConfig>& rungs,
                       const std::vector<double>& fractions, double steps,
                       const UnitCostTable& table, const TrafficProfile& profile);

}  // namespace dsq
