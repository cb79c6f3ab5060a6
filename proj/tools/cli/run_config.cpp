#include "run_config.hpp"

#include <cstdlib>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>

#include "dsq/error.hpp"

namespace dsq::cli {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"run", {"method", "seed", "out"}},
      {"model", {"n_layers", "d_model", "n_heads", "d_ff", "vocab", "seq_len", "batch_size"}},
      {"task", {"variant", "samples", "valid_fraction", "seed"}},
      {"train",
       {"epochs", "lr", "warmup", "label_smoothing", "dropout", "weight_decay", "grad_clip", "activation",
        "divergence_factor", "divergence_window", "abort_on_failure"}},
      {"precision", {"setup"}},
      {"ladder", {"family", "rungs", "patience", "min_delta"}},
      {"cost", {"table"}},
      {"traffic", {"activation", "activation.width", "weight", "weight.width", "stash", "stash.width", "act_grad",
                   "act_grad.width", "weight_grad", "weight_grad.width", "optimizer", "optimizer.width"}},
      {"estimate", {"model", "target_arith", "target_dram", "fractions"}},
      {"sweep", {"method", "grid"}},
      {"report", {"peak_ops", "bandwidth"}},
  };
  return s;
}

void check_schema(const IniSections& sections) {
  for (const auto& [name, kv] : sections) {
    if (name.empty() && kv.empty()) continue;
    const auto it = schema().find(name);
    if (it == schema().end()) throw ConfigError("unknown config section [" + name + "]");
    for (const auto& [key, value] : kv)
      if (!it->second.contains(key)) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
  }
}

template <class T>
T as(const std::string& section, const std::string& key, const std::string& value) {
  try {
    return boost::lexical_cast<T>(boost::trim_copy(value));
  } catch (const boost::bad_lexical_cast&) {
    throw ConfigError("[" + section + "] " + key + ": cannot parse '" + value + "'");
  }
}

bool as_bool(const std::string& section, const std::string& key, const std::string& value) {
  const auto v = boost::algorithm::to_lower_copy(boost::trim_copy(value));
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError("[" + section + "] " + key + ": expected a boolean, got '" + value + "'");
}

struct Reader {
  const IniSections& sections;

  const std::string* find(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    if (s == sections.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  template <class T>
  void get(const std::string& section, const std::string& key, T& out) const {
    if (const auto* v = find(section, key)) {
      if constexpr (std::is_same_v<T, bool>) {
        out = as_bool(section, key, *v);
      } else if constexpr (std::is_same_v<T, std::string>) {
        out = boost::trim_copy(*v);
      } else {
        out = as<T>(section, key, *v);
      }
    }
  }
};

ModelSpec parse_model_name(const std::string& name) {
  if (name == "transformer_6l") return ModelSpec::transformer_6l();
  if (name == "toy") return ModelSpec::toy();
  throw ConfigError("[estimate] model must be transformer_6l or toy, got '" + name + "'");
}

std::string join_rungs(const std::vector<PrecisionConfig>& rungs) {
  std::string out;
  for (std::size_t i = 0; i < rungs.size(); ++i) out += (i ? " > " : "") + rungs[i].setup_string();
  return out;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::FloatingPoint: return "floating-point";
    case Method::Fixed: return "fixed";
    case Method::Bfp: return "bfp";
    case Method::StashingFixed: return "stashing-fixed";
    case Method::StashingBfp: return "stashing-bfp";
    case Method::Dsq: return "dsq";
  }
  return "floating-point";
}

Method parse_method(const std::string& name) {
  for (auto m : {Method::FloatingPoint, Method::Fixed, Method::Bfp, Method::StashingFixed, Method::StashingBfp,
                 Method::Dsq})
    if (method_name(m) == name) return m;
  throw ConfigError("unknown method '" + name +
                    "' (expected floating-point, fixed, bfp, stashing-fixed, stashing-bfp or dsq)");
}

FormatKind method_family(Method m) {
  switch (m) {
    case Method::FloatingPoint: return FormatKind::Reference;
    case Method::Fixed:
    case Method::StashingFixed: return FormatKind::Fixed;
    case Method::Bfp:
    case Method::StashingBfp:
    case Method::Dsq: return FormatKind::Bfp;
  }
  return FormatKind::Reference;
}

bool is_static(Method m) { return m != Method::Dsq; }

std::string RunConfig::setup_label() const {
  if (plan.is_schedule()) return join_rungs(plan.ladder->configs);
  return plan.fixed.setup_string();
}

std::vector<PrecisionConfig> parse_setup_list(const std::string& text, FormatKind family) {
  std::vector<PrecisionConfig> out;
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(";|"));
  for (auto& p : parts) {
    boost::trim(p);
    if (p.empty()) continue;
    auto cfg = PrecisionConfig::parse(p, family);
    validate(cfg);
    out.push_back(cfg);
  }
  return out;
}

ScheduleLadder ladder_from(const KeyValues& kv) {
  for (const auto& [k, v] : kv)
    if (!schema().at("ladder").contains(k)) throw ConfigError("unknown key '" + k + "' in [ladder]");
  FormatKind family = FormatKind::Bfp;
  if (auto it = kv.find("family"); it != kv.end()) family = parse_family(boost::trim_copy(it->second));
  ScheduleLadder ladder = family == FormatKind::Reference ? ScheduleLadder{} : default_ladder(family);
  if (auto it = kv.find("rungs"); it != kv.end()) ladder.configs = parse_setup_list(it->second, family);
  if (auto it = kv.find("patience"); it != kv.end()) ladder.patience = as<int>("ladder", "patience", it->second);
  if (auto it = kv.find("min_delta"); it != kv.end())
    ladder.min_delta = as<double>("ladder", "min_delta", it->second);
  require_valid(ladder);
  return ladder;
}

ScheduleLadder load_ladder(const std::filesystem::path& path) {
  const auto sections = read_ini_file(path);
  for (const auto& [name, kv] : sections)
    if (name != "ladder" && !kv.empty()) throw ConfigError("ladder file may only hold a [ladder] section");
  const auto it = sections.find("ladder");
  if (it == sections.end()) throw ConfigError("ladder file " + path.string() + " has no [ladder] section");
  return ladder_from(it->second);
}

std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("DSQ_OUT_DIR"); env && *env) return env;
  return "dsq-out";
}

RunConfig make_run_config(const IniSections& sections, const Overrides& ov) {
  check_schema(sections);
  const Reader r{sections};
  RunConfig cfg;

  std::string method = "floating-point";
  r.get("run", "method", method);
  if (ov.method) method = *ov.method;
  cfg.method = parse_method(method);
  std::uint64_t seed = 1;
  r.get("run", "seed", seed);
  if (ov.seed) seed = *ov.seed;
  cfg.train.seed = seed;
  cfg.task_seed = seed;
  std::string out;
  r.get("run", "out", out);
  cfg.out_dir = ov.out_dir ? *ov.out_dir : out.empty() ? default_out_dir() : std::filesystem::path(out);

  auto& m = cfg.model;
  r.get("model", "n_layers", m.n_layers);
  r.get("model", "d_model", m.d_model);
  r.get("model", "n_heads", m.n_heads);
  r.get("model", "d_ff", m.d_ff);
  r.get("model", "vocab", m.vocab);
  r.get("model", "seq_len", m.seq_len);
  r.get("model", "batch_size", m.batch_size);
  validate(m);

  std::string variant = variant_name(cfg.variant);
  r.get("task", "variant", variant);
  cfg.variant = parse_variant(variant);
  r.get("task", "samples", cfg.samples);
  r.get("task", "valid_fraction", cfg.valid_fraction);
  r.get("task", "seed", cfg.task_seed);

  auto& t = cfg.train;
  r.get("train", "epochs", t.epochs);
  r.get("train", "lr", t.base_lr);
  r.get("train", "warmup", t.warmup);
  r.get("train", "label_smoothing", t.model.label_smoothing);
  r.get("train", "dropout", t.model.dropout);
  r.get("train", "weight_decay", t.adam.weight_decay);
  r.get("train", "grad_clip", t.adam.grad_clip);
  std::string act = "gelu";
  r.get("train", "activation", act);
  if (act == "gelu") t.model.activation = Activation::Gelu;
  else if (act == "relu") t.model.activation = Activation::Relu;
  else throw ConfigError("[train] activation must be gelu or relu");
  r.get("train", "divergence_factor", t.divergence_factor);
  r.get("train", "divergence_window", t.divergence_window);
  r.get("train", "abort_on_failure", t.abort_on_failure);
  if (t.epochs < 0) throw ConfigError("[train] epochs must be non-negative");
  if (!(t.base_lr > 0.0)) throw ConfigError("[train] lr must be positive");
  if (t.warmup < 1) throw ConfigError("[train] warmup must be at least 1");
  if (t.model.dropout < 0.0 || t.model.dropout >= 1.0) throw ConfigError("[train] dropout must lie in [0, 1)");
  if (t.model.label_smoothing < 0.0 || t.model.label_smoothing >= 1.0)
    throw ConfigError("[train] label_smoothing must lie in [0, 1)");

  // precision plan
  std::optional<std::string> setup;
  if (const auto* v = r.find("precision", "setup")) setup = *v;
  if (ov.setup) setup = *ov.setup;
  const FormatKind family = method_family(cfg.method);
  switch (cfg.method) {
    case Method::FloatingPoint:
      if (setup) {
        const auto parsed = PrecisionConfig::parse(*setup, FormatKind::Reference);
        if (!(parsed == PrecisionConfig::reference()))
          throw ConfigError("method floating-point runs at Reference precision and takes no setup");
      }
      cfg.plan = PrecisionPlan::static_config(PrecisionConfig::reference());
      break;
    case Method::Fixed:
    case Method::Bfp:
      if (!setup) throw ConfigError("method " + method_name(cfg.method) + " requires a precision setup (--setup)");
      [[fallthrough]];
    case Method::StashingFixed:
    case Method::StashingBfp: {
      const auto pc = PrecisionConfig::parse(setup.value_or("16,4,4,16"), family);
      validate(pc);
      if (pc.family() != family && pc.family() != FormatKind::Reference)
        throw ConfigError("setup " + pc.to_string() + " does not match method " + method_name(cfg.method));
      cfg.plan = PrecisionPlan::static_config(pc);
      break;
    }
    case Method::Dsq:
      if (setup) throw ConfigError("method dsq follows a ladder and takes no fixed setup");
      break;
  }
  if (ov.ladder && cfg.method != Method::Dsq)
    throw ConfigError("--ladder only applies to method dsq");
  ScheduleLadder ladder = default_ladder(FormatKind::Bfp);
  if (ov.ladder) {
    ladder = load_ladder(*ov.ladder);
  } else if (auto it = sections.find("ladder"); it != sections.end()) {
    ladder = ladder_from(it->second);
  }
  cfg.estimate_ladder = ladder;
  if (cfg.method == Method::Dsq) cfg.plan = PrecisionPlan::schedule(ladder);

  std::string table;
  r.get("cost", "table", table);
  cfg.cost_table_path = table;
  cfg.table = load_unit_cost_table(cfg.cost_table_path);
  if (auto it = sections.find("traffic"); it != sections.end()) cfg.profile = traffic_profile_from(it->second);
  cfg.profile.validate();

  std::string est_model = "transformer_6l";
  r.get("estimate", "model", est_model);
  cfg.estimate_model = parse_model_name(est_model);
  r.get("estimate", "target_arith", cfg.dsq_target.arith);
  r.get("estimate", "target_dram", cfg.dsq_target.dram);
  if (const auto* v = r.find("estimate", "fractions")) {
    std::vector<std::string> parts;
    boost::split(parts, *v, boost::is_any_of(","));
    for (auto& p : parts) cfg.dsq_fractions.push_back(as<double>("estimate", "fractions", p));
    if (cfg.dsq_fractions.size() != ladder.configs.size())
      throw ConfigError("[estimate] fractions needs one entry per ladder rung");
    double sum = 0.0;
    for (double f : cfg.dsq_fractions) {
      if (f < 0.0) throw ConfigError("[estimate] fractions must be non-negative");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("[estimate] fractions must sum to 1");
  }

  std::string sweep_method = "fixed";
  r.get("sweep", "method", sweep_method);
  cfg.sweep_method = parse_method(sweep_method);
  if (cfg.sweep_method == Method::Dsq || cfg.sweep_method == Method::FloatingPoint)
    throw ConfigError("[sweep] method must be a quantized static method");
  if (const auto* v = r.find("sweep", "grid"))
    cfg.sweep_grid = parse_setup_list(*v, method_family(cfg.sweep_method));

  r.get("report", "peak_ops", cfg.peak_ops);
  r.get("report", "bandwidth", cfg.bandwidth);
  if (!(cfg.peak_ops > 0.0) || !(cfg.bandwidth > 0.0))
    throw ConfigError("[report] peak_ops and bandwidth must be positive");
  return cfg;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides) {
  return make_run_config(path ? read_ini_file(*path) : IniSections{}, overrides);
}

}  // namespace dsq::cli
