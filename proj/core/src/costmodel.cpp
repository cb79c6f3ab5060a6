#include "dsq/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "dsq/error.hpp"

namespace dsq {
namespace {

int idx(TensorClass c) { return static_cast<int>(c); }
int idx(Direction d) { return static_cast<int>(d); }

const char* const kClassNames[] = {"activation", "weight", "stash", "act_grad", "weight_grad", "optimizer"};

}  // namespace

std::string class_name(TensorClass c) { return kClassNames[idx(c)]; }

TensorClass parse_class(const std::string& name) {
  for (auto c : kTensorClasses)
    if (class_name(c) == name) return c;
  throw ConfigError("unknown tensor class '" + name + "'");
}

std::string direction_name(Direction d) { return d == Direction::Read ? "read" : "write"; }

// ---------------------------------------------------------------------------

double CostLedger::total_dram_bits() const {
  double total = 0.0;
  for (const auto& row : dram_bits) total += row[0] + row[1];
  return total;
}

bool CostLedger::empty() const { return *this == CostLedger{}; }

CostLedger& CostLedger::operator+=(const CostLedger& o) {
  mac_units += o.mac_units;
  macs += o.macs;
  gemms += o.gemms;
  for (int c = 0; c < 6; ++c)
    for (int d = 0; d < 2; ++d) {
      dram_bits[c][d] += o.dram_bits[c][d];
      transfers[c][d] += o.transfers[c][d];
    }
  return *this;
}

CostLedger CostLedger::scaled(double k) const {
  CostLedger out = *this;
  out.mac_units *= k;
  out.macs *= k;
  out.gemms = std::llround(static_cast<double>(gemms) * k);
  for (int c = 0; c < 6; ++c)
    for (int d = 0; d < 2; ++d) {
      out.dram_bits[c][d] *= k;
      out.transfers[c][d] = std::llround(static_cast<double>(transfers[c][d]) * k);
    }
  return out;
}

// ---------------------------------------------------------------------------

UnitCostTable UnitCostTable::formula_only() { return UnitCostTable{}; }

UnitCostTable UnitCostTable::defaults() {
  UnitCostTable t;
  // Block floating point MAC costs relative to a fixed-32 MAC. 32 and 16
  // come straight from the uniform-precision rows; 4 makes the [16,4,4,16]
  // stashing row land on 0.10 through the geometric-mean rule; 8 is the
  // geometric midpoint of 4 and 16; 2 places the [2,2,2,16] rung near the
  // reported adaptive-schedule cost.
  t.set_diagonal(FormatKind::Bfp, 2, 0.004);
  t.set_diagonal(FormatKind::Bfp, 4, 0.02);
  t.set_diagonal(FormatKind::Bfp, 8, 0.06);
  t.set_diagonal(FormatKind::Bfp, 16, 0.18);
  t.set_diagonal(FormatKind::Bfp, 32, 0.56);
  // Uniform 32- and 16-bit Bfp traffic ratios (1.13x, 0.63x) imply about
  // 4.16 bits per element on top of the mantissa; the same overhead is
  // applied to 4 and 8. The 2-bit format keeps the plain formula (2.5).
  t.set_storage(FormatKind::Bfp, 4, 8.16);
  t.set_storage(FormatKind::Bfp, 8, 12.16);
  t.set_storage(FormatKind::Bfp, 16, 20.16);
  t.set_storage(FormatKind::Bfp, 32, 36.16);
  return t;
}

void UnitCostTable::set_diagonal(FormatKind kind, int bits, double cost) {
  if (kind == FormatKind::Reference) {
    reference_cost_ = cost;
    return;
  }
  diag_[{kind, bits}] = cost;
}

void UnitCostTable::set_pair(FormatKind kind, int a, int b, double cost) {
  if (a > b) std::swap(a, b);
  pairs_[{kind, a, b}] = cost;
}

void UnitCostTable::set_storage(FormatKind kind, int bits, double bits_per_element) {
  storage_[{kind, bits}] = bits_per_element;
}

std::optional<double> UnitCostTable::diagonal(FormatKind kind, int bits) const {
  if (kind == FormatKind::Reference) return reference_cost_;
  if (auto it = diag_.find({kind, bits}); it != diag_.end()) return it->second;
  if (kind == FormatKind::Fixed) return bits * bits / 1024.0;
  return std::nullopt;
}

std::optional<double> UnitCostTable::storage_override(FormatKind kind, int bits) const {
  if (auto it = storage_.find({kind, bits}); it != storage_.end()) return it->second;
  return std::nullopt;
}

double UnitCostTable::diag_cost(const NumberFormat& f) const {
  if (auto c = diagonal(f.kind, f.bits())) return *c;
  throw ConfigError("no MAC cost for " + f.to_string() + " in the unit-cost table");
}

double UnitCostTable::mac_cost(const NumberFormat& a, const NumberFormat& b) const {
  if (a.kind == b.kind && a.kind != FormatKind::Reference) {
    const int lo = std::min(a.bits(), b.bits());
    const int hi = std::max(a.bits(), b.bits());
    if (auto it = pairs_.find({a.kind, lo, hi}); it != pairs_.end()) return it->second;
    if (a.kind == FormatKind::Fixed && !diag_.contains({a.kind, a.bits()}) &&
        !diag_.contains({b.kind, b.bits()}))
      return a.bits() * b.bits() / 1024.0;
  }
  if (a == b) return diag_cost(a);
  return std::sqrt(diag_cost(a) * diag_cost(b));
}

double UnitCostTable::storage_bits(const NumberFormat& fmt, std::int64_t n) const {
  if (auto o = storage_override(fmt.kind, fmt.bits())) return *o * static_cast<double>(n);
  return static_cast<double>(dsq::storage_bits(fmt, n));
}

void UnitCostTable::validate() const {
  const auto f32 = NumberFormat::fixed(32);
  if (mac_cost(f32, f32) != 1.0) throw ConfigError("unit-cost table must have mac_cost(fixed:32, fixed:32) == 1");
  if (!(reference_cost_ > 0.0)) throw ConfigError("reference MAC cost must be positive");
  for (const auto& [key, cost] : diag_)
    if (!(cost > 0.0)) throw ConfigError("MAC costs must be positive");
  for (const auto& [key, cost] : pairs_) {
    if (!(cost > 0.0)) throw ConfigError("MAC costs must be positive");
    if (std::get<1>(key) > std::get<2>(key)) throw ConfigError("pair entries must be stored symmetric");
  }
  for (const auto& [key, width] : storage_)
    if (!(width > 0.0)) throw ConfigError("storage overrides must be positive");
}

// ---------------------------------------------------------------------------

std::string width_source_name(WidthSource w) {
  switch (w) {
    case WidthSource::Q0: return "q0";
    case WidthSource::Q1: return "q1";
    case WidthSource::Q2: return "q2";
    case WidthSource::Q3: return "q3";
    case WidthSource::Reference: return "ref";
  }
  return "?";
}

WidthSource parse_width_source(const std::string& s) {
  for (auto w : {WidthSource::Q0, WidthSource::Q1, WidthSource::Q2, WidthSource::Q3, WidthSource::Reference})
    if (width_source_name(w) == s) return w;
  throw ConfigError("unknown width source '" + s + "' (expected q0..q3 or ref)");
}

TrafficProfile TrafficProfile::default_profile() {
  TrafficProfile p;
  p.rule(TensorClass::Activation) = {false, true, WidthSource::Q0};
  p.rule(TensorClass::Weight) = {true, false, WidthSource::Q0};
  p.rule(TensorClass::Stash) = {true, true, WidthSource::Q1};
  p.rule(TensorClass::ActGrad) = {false, true, WidthSource::Q3};
  p.rule(TensorClass::WeightGrad) = {false, false, WidthSource::Reference};
  p.rule(TensorClass::Optimizer) = {false, false, WidthSource::Reference};
  return p;
}

TrafficProfile TrafficProfile::everything() {
  TrafficProfile p = default_profile();
  for (auto& r : p.rules) r.read = r.write = true;
  return p;
}

bool TrafficProfile::includes(TensorClass c, Direction d) const {
  const auto& r = rule(c);
  return d == Direction::Read ? r.read : r.write;
}

NumberFormat TrafficProfile::format_for(TensorClass c, const PrecisionConfig& cfg) const {
  switch (rule(c).width) {
    case WidthSource::Q0: return cfg.q0;
    case WidthSource::Q1: return cfg.q1;
    case WidthSource::Q2: return cfg.q2;
    case WidthSource::Q3: return cfg.q3;
    case WidthSource::Reference: return NumberFormat::reference();
  }
  return NumberFormat::reference();
}

void TrafficProfile::validate() const {
  if (rule(TensorClass::Stash).width != WidthSource::Q1)
    throw ConfigError("stash traffic is always sized by q1");
  if (rule(TensorClass::ActGrad).width != WidthSource::Q3)
    throw ConfigError("activation-gradient traffic is always sized by q3");
}

// ---------------------------------------------------------------------------

void record_gemm(CostLedger& ledger, std::int64_t m, std::int64_t n, std::int64_t k,
                 const NumberFormat& a, const NumberFormat& b, const UnitCostTable& table) {
  if (m <= 0 || n <= 0 || k <= 0) throw ContractViolation("GEMM dimensions must be positive");
  const double count = static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k);
  ledger.mac_units += count * table.mac_cost(a, b);
  ledger.macs += count;
  ledger.gemms += 1;
}

void record_dram(CostLedger& ledger, TensorClass c, std::int64_t n, const NumberFormat& fmt, Direction d,
                 const TrafficProfile& profile, const UnitCostTable& table) {
  if (!profile.includes(c, d)) return;
  ledger.dram_bits[idx(c)][idx(d)] += table.storage_bits(fmt, n);
  ledger.transfers[idx(c)][idx(d)] += 1;
}

void record_dram(CostLedger& ledger, TensorClass c, std::int64_t n, const NumberFormat& fmt, Direction d,
                 const TrafficProfile& profile) {
  record_dram(ledger, c, n, fmt, d, profile, UnitCostTable::formula_only());
}

// ---------------------------------------------------------------------------

std::vector<GemmSite> enumerate_gemms(const ModelSpec& spec) {
  validate(spec);
  const std::int64_t tokens = spec.tokens_per_step();
  const std::int64_t d = spec.d_model, f = spec.d_ff, s = spec.seq_len, dh = spec.head_dim();
  const std::int64_t instances = static_cast<std::int64_t>(spec.batch_size) * spec.n_heads;
  std::vector<GemmSite> sites;
  for (int l = 0; l < spec.n_layers; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    for (const char* proj : {"wq", "wk", "wv"}) sites.push_back({p + proj, tokens, d, d, true, 1});
    sites.push_back({p + "scores", s, dh, s, false, instances});
    sites.push_back({p + "context", s, s, dh, false, instances});
    sites.push_back({p + "wo", tokens, d, d, true, 1});
    sites.push_back({p + "ffn_in", tokens, d, f, true, 1});
    sites.push_back({p + "ffn_out", tokens, f, d, true, 1});
  }
  sites.push_back({"output", tokens, d, spec.vocab, true, 1});
  return sites;
}

void account_site(CostLedger& ledger, const GemmSite& site, const PrecisionConfig& cfg,
                  const UnitCostTable& table, const TrafficProfile& profile) {
  CostLedger one;
  const auto ref = NumberFormat::reference();
  const auto act = profile.format_for(TensorClass::Activation, cfg);
  const auto wgt = profile.format_for(TensorClass::Weight, cfg);
  const std::int64_t mk = site.m * site.k, kn = site.k * site.n, mn = site.m * site.n;
  auto dram = [&](TensorClass c, std::int64_t n, const NumberFormat& f, Direction d) {
    record_dram(one, c, n, f, d, profile, table);
  };

  // forward
  record_gemm(one, site.m, site.n, site.k, cfg.q0, cfg.q0, table);
  dram(TensorClass::Activation, mk, act, Direction::Read);
  if (site.rhs_is_weight) {
    dram(TensorClass::Weight, kn, wgt, Direction::Read);
  } else {
    dram(TensorClass::Activation, kn, act, Direction::Read);
  }
  dram(TensorClass::Activation, mn, act, Direction::Write);
  dram(TensorClass::Stash, mk, cfg.q1, Direction::Write);
  if (!site.rhs_is_weight) dram(TensorClass::Stash, kn, cfg.q1, Direction::Write);

  // backward
  dram(TensorClass::ActGrad, mn, cfg.q3, Direction::Read);
  if (site.rhs_is_weight) {
    dram(TensorClass::Weight, kn, wgt, Direction::Read);
    record_gemm(one, site.m, site.k, site.n, cfg.q2, cfg.q0, table);
  } else {
    dram(TensorClass::Stash, kn, cfg.q1, Direction::Read);
    record_gemm(one, site.m, site.k, site.n, cfg.q2, cfg.q1, table);
  }
  dram(TensorClass::ActGrad, mk, cfg.q3, Direction::Write);
  dram(TensorClass::Stash, mk, cfg.q1, Direction::Read);
  record_gemm(one, site.k, site.n, site.m, cfg.q1, cfg.q3, table);
  if (site.rhs_is_weight) {
    dram(TensorClass::WeightGrad, kn, ref, Direction::Write);
  } else {
    dram(TensorClass::ActGrad, kn, cfg.q3, Direction::Write);
  }

  if (site.rhs_is_weight) {
    // optimizer: read gradient, weight and both moments, write back weight and moments
    dram(TensorClass::WeightGrad, kn, ref, Direction::Read);
    dram(TensorClass::Optimizer, 3 * kn, ref, Direction::Read);
    dram(TensorClass::Optimizer, 3 * kn, ref, Direction::Write);
  }

  ledger += site.count == 1 ? one : one.scaled(static_cast<double>(site.count));
}

CostLedger estimate_static(const ModelSpec& spec, const PrecisionConfig& cfg, std::int64_t steps,
                           const UnitCostTable& table, const TrafficProfile& profile) {
  if (steps < 0) throw ContractViolation("step count must be non-negative");
  if (steps == 0) return {};
  CostLedger step;
  for (const auto& site : enumerate_gemms(spec)) account_site(step, site, cfg, table, profile);
  return steps == 1 ? step : step.scaled(static_cast<double>(steps));
}

CostLedger estimate_schedule(const ModelSpec& spec, const std::vector<PrecisionConfig>& rungs,
                             const std::vector<std::int64_t>& steps_per_rung, const UnitCostTable& table,
                             const TrafficProfile& profile) {
  if (rungs.size() != steps_per_rung.size())
    throw ContractViolation("one step count per rung is required");
  CostLedger total;
  for (std::size_t i = 0; i < rungs.size(); ++i)
    total += estimate_static(spec, rungs[i], steps_per_rung[i], table, profile);
  return total;
}

CostRatios normalize(const CostLedger& ledger, const CostLedger& baseline) {
  if (baseline.mac_units == 0.0 || baseline.total_dram_bits() == 0.0)
    throw ContractViolation("cannot normalise against an empty baseline ledger");
  return {ledger.mac_units / baseline.mac_units, ledger.total_dram_bits() / baseline.total_dram_bits()};
}

PrecisionConfig baseline_config() { return PrecisionConfig::uniform(NumberFormat::fixed(32)); }

RooflinePoint roofline(const CostLedger& ledger, double peak, double bandwidth) {
  if (!(peak > 0.0) || !(bandwidth > 0.0))
    throw ContractViolation("roofline needs positive peak and bandwidth");
  const double bytes = ledger.total_dram_bits() / 8.0;
  if (bytes == 0.0) return {std::numeric_limits<double>::infinity(), peak};
  const double intensity = ledger.macs / bytes;
  return {intensity, std::min(peak, bandwidth * intensity)};
}

// ---------------------------------------------------------------------------

namespace {

struct SubsetSolution {
  std::vector<double> weights;
  double residual2 = 0.0;
  bool ok = false;
};

// min ||P w - t||^2 s.t. sum(w) = 1 over the columns of P in `support`,
// solved through the KKT system; rejected if any weight is negative.
SubsetSolution solve_support(const Eigen::MatrixXd& points, const Eigen::Vector2d& target,
                             const std::vector<int>& support) {
  const int k = static_cast<int>(support.size());
  Eigen::MatrixXd sub(2, k);
  for (int j = 0; j < k; ++j) sub.col(j) = points.col(support[j]);
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
  kkt.topLeftCorner(k, k) = 2.0 * sub.transpose() * sub;
  kkt.block(0, k, k, 1).setOnes();
  kkt.block(k, 0, 1, k).setOnes();
  Eigen::VectorXd rhs(k + 1);
  rhs.head(k) = 2.0 * sub.transpose() * target;
  rhs(k) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return {};
  const Eigen::VectorXd x = lu.solve(rhs);
  SubsetSolution out;
  out.weights.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    if (x(j) < -1e-12) return {};
    out.weights[static_cast<std::size_t>(j)] = std::max(0.0, x(j));
  }
  out.residual2 = (sub * x.head(k) - target).squaredNorm();
  out.ok = true;
  return out;
}

}  // namespace

PhaseFit fit_phase_durations(const UnitCostTable& table, const ModelSpec& spec,
                             const std::vector<PrecisionConfig>& rungs, CostRatios target,
                             const TrafficProfile& profile) {
  if (rungs.empty()) throw ContractViolation("cannot fit phases of an empty ladder");
  if (rungs.size() > 16) throw ContractViolation("phase fitting supports at most 16 rungs");
  const CostLedger base = estimate_static(spec, baseline_config(), 1, table, profile);
  const int n = static_cast<int>(rungs.size());
  Eigen::MatrixXd points(2, n);
  for (int i = 0; i < n; ++i) {
    const auto r = normalize(estimate_static(spec, rungs[static_cast<std::size_t>(i)], 1, table, profile), base);
    points(0, i) = r.arith;
    points(1, i) = r.dram;
  }
  const Eigen::Vector2d t(target.arith, target.dram);

  PhaseFit best;
  double best_r2 = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> support;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) support.push_back(i);
    const auto sol = solve_support(points, t, support);
    if (!sol.ok || !(sol.residual2 < best_r2 - 1e-18)) continue;
    best_r2 = sol.residual2;
    best.fractions.assign(static_cast<std::size_t>(n), 0.0);
    for (std::size_t j = 0; j < support.size(); ++j)
      best.fractions[static_cast<std::size_t>(support[j])] = sol.weights[j];
  }
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = best.fractions[static_cast<std::size_t>(i)];
  const Eigen::Vector2d achieved = points * w;
  best.ratios = {achieved(0), achieved(1)};
  best.residual = (achieved - t).norm();
  return best;
}

CostLedger blend_rungs(const ModelSpec& spec, const std::vector<PrecisionConfig>& rungs,
                       const std::vector<double>& fractions, double steps, const UnitCostTable& table,
                       const TrafficProfile& profile) {
  if (rungs.size() != fractions.size()) throw ContractViolation("one fraction per rung is required");
  CostLedger total;
  for (std::size_t i = 0; i < rungs.size(); ++i)
    if (fractions[i] > 0.0) total += estimate_static(spec, rungs[i], 1, table, profile).scaled(fractions[i] * steps);
  return total;
}

}  // namespace dsq
