#include "commands.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dsq/error.hpp"
#include "json.hpp"
#include "svg.hpp"

namespace dsq::cli {

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CostLedger baseline(const RunConfig& cfg, const ModelSpec& spec, std::int64_t steps) {
  return estimate_static(spec, baseline_config(), steps, cfg.table, cfg.profile);
}

EstimateRow static_row(const RunConfig& cfg, const std::string& method, const PrecisionConfig& pc) {
  EstimateRow row{method, pc.setup_string(), {}, {}, {}, 0.0};
  row.ledger = estimate_static(cfg.estimate_model, pc, 1, cfg.table, cfg.profile);
  row.ratios = normalize(row.ledger, baseline(cfg, cfg.estimate_model, 1));
  return row;
}

EstimateRow dsq_row(const RunConfig& cfg, const ScheduleLadder& ladder) {
  EstimateRow row;
  row.method = method_name(Method::Dsq);
  std::string label;
  for (std::size_t i = 0; i < ladder.configs.size(); ++i) label += (i ? " > " : "") + ladder.configs[i].setup_string();
  row.setup = label;
  const auto& spec = cfg.estimate_model;
  if (cfg.dsq_fractions.empty()) {
    const auto fit = fit_phase_durations(cfg.table, spec, ladder.configs, cfg.dsq_target, cfg.profile);
    row.fractions = fit.fractions;
    row.residual = fit.residual;
  } else {
    row.fractions = cfg.dsq_fractions;
  }
  row.ledger = blend_rungs(spec, ladder.configs, row.fractions, 1.0, cfg.table, cfg.profile);
  row.ratios = normalize(row.ledger, baseline(cfg, spec, 1));
  if (!cfg.dsq_fractions.empty())
    row.residual = std::hypot(row.ratios.arith - cfg.dsq_target.arith, row.ratios.dram - cfg.dsq_target.dram);
  return row;
}

std::vector<CsvRow> run_csv_rows(const RunConfig& cfg, const RunReport& r) {
  const std::string m = method_name(cfg.method), s = cfg.setup_label();
  std::vector<CsvRow> rows{
      {m, s, "verdict", r.verdict},
      {m, s, "epochs", std::to_string(r.epochs.empty() ? 0 : r.epochs.back().epoch)},
      {m, s, "steps", std::to_string(r.steps)},
      {m, s, "final_valid_loss", format_number(r.final_valid_loss())},
      {m, s, "final_token_acc", format_number(r.final_accuracy())},
      {m, s, "mac_units", format_number(r.ledger.mac_units)},
      {m, s, "dram_bits", format_number(r.ledger.total_dram_bits())},
  };
  if (r.steps > 0) {
    const auto ratios = normalize(r.ledger, baseline(cfg, cfg.model, r.steps));
    rows.push_back({m, s, "arith_ratio", format_number(ratios.arith)});
    rows.push_back({m, s, "dram_ratio", format_number(ratios.dram)});
  }
  return rows;
}

CopyTask task_for(const RunConfig& cfg) {
  return make_copy_task(cfg.model.vocab, cfg.model.seq_len, cfg.samples, cfg.task_seed, cfg.variant,
                        cfg.valid_fraction);
}

}  // namespace

std::vector<EstimateRow> default_estimate_rows(const RunConfig& cfg) {
  const auto F = FormatKind::Fixed, B = FormatKind::Bfp;
  std::vector<EstimateRow> rows{
      static_row(cfg, "floating-point", PrecisionConfig::reference()),
      static_row(cfg, "fixed", PrecisionConfig::of(F, 32, 32, 32, 32)),
      static_row(cfg, "fixed", PrecisionConfig::of(F, 16, 16, 16, 16)),
      static_row(cfg, "bfp", PrecisionConfig::of(B, 32, 32, 32, 32)),
      static_row(cfg, "bfp", PrecisionConfig::of(B, 16, 16, 16, 16)),
      static_row(cfg, "stashing-fixed", PrecisionConfig::of(F, 16, 4, 4, 16)),
      static_row(cfg, "stashing-bfp", PrecisionConfig::of(B, 16, 4, 4, 16)),
  };
  rows.push_back(dsq_row(cfg, cfg.estimate_ladder));
  return rows;
}

EstimateRow estimate_row(const RunConfig& cfg) {
  if (cfg.plan.is_schedule()) return dsq_row(cfg, *cfg.plan.ladder);
  return static_row(cfg, method_name(cfg.method), cfg.plan.fixed);
}

std::vector<CsvRow> estimate_csv_rows(const std::vector<EstimateRow>& rows) {
  std::vector<CsvRow> out;
  for (const auto& r : rows) {
    out.push_back({r.method, r.setup, "arith_ratio", format_number(r.ratios.arith)});
    out.push_back({r.method, r.setup, "dram_ratio", format_number(r.ratios.dram)});
    out.push_back({r.method, r.setup, "mac_units_per_step", format_number(r.ledger.mac_units)});
    out.push_back({r.method, r.setup, "dram_bits_per_step", format_number(r.ledger.total_dram_bits())});
    for (std::size_t i = 0; i < r.fractions.size(); ++i)
      out.push_back({r.method, r.setup, "phase_fraction." + std::to_string(i), format_number(r.fractions[i])});
    if (!r.fractions.empty()) out.push_back({r.method, r.setup, "fit_residual", format_number(r.residual)});
  }
  return out;
}

RunReport cmd_train(const RunConfig& cfg, std::ostream& log) {
  const auto task = task_for(cfg);
  const auto report = train_run(cfg.model, task, cfg.plan, cfg.train, cfg.table, cfg.profile, method_name(cfg.method));
  write_file(cfg.out_dir / "metrics.jsonl", metrics_jsonl(report));
  write_file(cfg.out_dir / "summary.json", summary_json(report));
  write_file(cfg.out_dir / "costs.csv", write_csv(run_csv_rows(cfg, report)));
  log << method_name(cfg.method) << ' ' << cfg.setup_label() << ": " << report.verdict << ", token accuracy "
      << format_number(report.final_accuracy()) << " after " << report.steps << " steps -> " << cfg.out_dir.string()
      << '\n';
  return report;
}

void cmd_estimate(const RunConfig& cfg, bool all_rows, std::ostream& out) {
  const auto rows = all_rows ? default_estimate_rows(cfg) : std::vector<EstimateRow>{estimate_row(cfg)};
  const auto text = write_csv(estimate_csv_rows(rows));
  write_file(cfg.out_dir / "estimate.csv", text);
  out << text;
}

void cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  std::vector<CsvRow> rows;
  const std::string m = method_name(cfg.sweep_method);
  for (const auto& setup : cfg.sweep_grid) {
    const std::string s = setup.setup_string();
    RunConfig one = cfg;
    one.method = cfg.sweep_method;
    one.plan = PrecisionPlan::static_config(setup);
    try {
      const auto report = train_run(one.model, task_for(one), one.plan, one.train, one.table, one.profile, m);
      rows.push_back({m, s, "verdict", report.verdict});
      rows.push_back({m, s, "final_token_acc", format_number(report.final_accuracy())});
      rows.push_back({m, s, "final_valid_loss", format_number(report.final_valid_loss())});
      if (setup.q3.bits() < 16 && !report.failed()) rows.push_back({m, s, "flag", "review"});
      log << m << ' ' << s << ": " << report.verdict << '\n';
    } catch (const std::exception& e) {
      rows.push_back({m, s, "verdict", "Failed"});
      rows.push_back({m, s, "error", e.what()});
      log << m << ' ' << s << ": Failed (" << e.what() << ")\n";
    }
    const auto est = static_row(one, m, setup);
    rows.push_back({m, s, "arith_ratio", format_number(est.ratios.arith)});
    rows.push_back({m, s, "dram_ratio", format_number(est.ratios.dram)});
  }
  write_file(cfg.out_dir / "sweep.csv", write_csv(rows));
}

void cmd_report(const RunConfig& cfg, std::ostream& log) {
  const auto metrics = cfg.out_dir / "metrics.jsonl";
  if (std::filesystem::exists(metrics)) {
    Series train{"train loss", {}}, valid{"valid loss", {}}, acc{"token accuracy", {}};
    std::istringstream lines(read_file(metrics));
    for (std::string line; std::getline(lines, line);) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      const double epoch = j.at("epoch").get<double>();
      auto value = [&](const char* key) {
        const auto& v = j.at(key);
        return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN();
      };
      train.points.emplace_back(epoch, value("train_loss"));
      valid.points.emplace_back(epoch, value("valid_loss"));
      acc.points.emplace_back(epoch, value("token_acc"));
    }
    write_file(cfg.out_dir / "loss.svg", line_chart({train, valid, acc}, {"Training curves", "epoch", "value"}));
    log << "wrote " << (cfg.out_dir / "loss.svg").string() << '\n';
  }

  std::vector<Series> series;
  const auto rows = default_estimate_rows(cfg);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : rows) {
    const auto p = roofline(r.ledger, cfg.peak_ops, cfg.bandwidth);
    series.push_back({r.method + " " + r.setup.substr(0, 16), {{p.operational_intensity, p.attainable}}, true});
    lo = std::min(lo, p.operational_intensity);
    hi = std::max(hi, p.operational_intensity);
  }
  Series roof{"roof", {}};
  const double ridge = cfg.peak_ops / cfg.bandwidth;
  lo = std::min(lo, ridge) / 4.0;
  hi = std::max(hi, ridge) * 4.0;
  for (int i = 0; i <= 32; ++i) {
    const double oi = lo * std::pow(hi / lo, i / 32.0);
    roof.points.emplace_back(oi, std::min(cfg.peak_ops, oi * cfg.bandwidth));
  }
  series.insert(series.begin(), roof);
  write_file(cfg.out_dir / "roofline.svg",
             line_chart(series, {"Roofline", "MACs per DRAM byte", "attainable MAC/s", true, true}));
  log << "wrote " << (cfg.out_dir / "roofline.svg").string() << '\n';
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantized-training simulator: toy training, cost estimation, sweeps and reports"};
  app.require_subcommand(1);

  std::optional<std::filesystem::path> config;
  Overrides ov;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "INI run configuration");
    sub->add_option("--seed", ov.seed, "random seed");
    sub->add_option("--out", ov.out_dir, "output directory (default $DSQ_OUT_DIR or ./dsq-out)");
    sub->add_option("--method", ov.method,
                    "floating-point | fixed | bfp | stashing-fixed | stashing-bfp | dsq");
    sub->add_option("--setup", ov.setup, "precision setup q0,q1,q2,q3");
    sub->add_option("--ladder", ov.ladder, "INI file with a [ladder] section");
  };
  auto* train = app.add_subcommand("train", "train the toy model and write metrics, summary and cost row");
  auto* estimate = app.add_subcommand("estimate", "static cost estimate normalised to fixed-point 32-bit");
  auto* sweep = app.add_subcommand("sweep", "train every setup of the [sweep] grid");
  auto* report = app.add_subcommand("report", "render loss and roofline SVGs");
  for (auto* sub : {train, estimate, sweep, report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    const IniSections sections = config ? read_ini_file(*config) : IniSections{};
    const RunConfig cfg = make_run_config(sections, ov);
    if (train->parsed()) {
      cmd_train(cfg, err);
    } else if (estimate->parsed()) {
      bool method_in_file = false;
      if (auto it = sections.find("run"); it != sections.end()) method_in_file = it->second.contains("method");
      cmd_estimate(cfg, !ov.method && !method_in_file, out);
    } else if (sweep->parsed()) {
      cmd_sweep(cfg, err);
    } else if (report->parsed()) {
      cmd_report(cfg, err);
    }
  } catch (const ConfigError& e) {
    err << "dsq: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "dsq: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dsq::cli
