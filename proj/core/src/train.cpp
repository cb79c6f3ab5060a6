#include "dsq/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dsq/error.hpp"
#include "json.hpp"

namespace dsq {

namespace {

using nlohmann::ordered_json;

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with our own index draw so the order does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

ordered_json to_json(const CostLedger& l) {
  ordered_json j;
  j["mac_units"] = l.mac_units;
  j["macs"] = l.macs;
  j["gemms"] = l.gemms;
  j["dram_bits"] = l.total_dram_bits();
  ordered_json classes = ordered_json::object();
  for (auto c : kTensorClasses) {
    ordered_json e;
    e["read_bits"] = l.bits(c, Direction::Read);
    e["write_bits"] = l.bits(c, Direction::Write);
    e["reads"] = l.transfer_count(c, Direction::Read);
    e["writes"] = l.transfer_count(c, Direction::Write);
    classes[class_name(c)] = e;
  }
  j["classes"] = classes;
  return j;
}

ordered_json to_json(const EpochMetrics& m) {
  ordered_json j;
  j["epoch"] = m.epoch;
  j["step"] = m.step;
  j["train_loss"] = number(m.train_loss);
  j["valid_loss"] = number(m.valid_loss);
  j["token_acc"] = number(m.token_accuracy);
  j["config"] = m.config.to_string();
  j["precision_setup"] = m.config.setup_string();
  if (m.rung >= 0) j["rung"] = m.rung;
  j["ledger"] = to_json(m.ledger);
  return j;
}

}  // namespace

std::pair<double, double> evaluate(const ModelSpec& spec, const ModelWeights& w, const Dataset& data,
                                   const PrecisionConfig& cfg, const ModelOptions& opts) {
  const auto b = static_cast<std::size_t>(spec.batch_size);
  const std::size_t n = data.size();
  if (n == 0) throw ConfigError("evaluation split is empty");
  QuantContext ctx{cfg, nullptr, nullptr, nullptr, nullptr};
  double loss_sum = 0.0, acc_sum = 0.0;
  for (std::size_t first = 0; first < n; first += b) {
    const std::size_t count = std::min(b, n - first);
    const Batch batch = data.slice(first, count);
    const auto r = forward(spec, w, batch, ctx, opts);
    loss_sum += r.loss * static_cast<double>(count);
    acc_sum += token_accuracy(r.logits, batch.targets) * static_cast<double>(count);
  }
  return {loss_sum / static_cast<double>(n), acc_sum / static_cast<double>(n)};
}

RunReport train_run(const ModelSpec& spec, const CopyTask& task, const PrecisionPlan& plan, const TrainOptions& opts,
                    const UnitCostTable& table, const TrafficProfile& profile, const std::string& method) {
  validate(spec);
  table.validate();
  profile.validate();
  if (opts.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (opts.divergence_window < 1) throw ConfigError("divergence window must be at least 1");
  if (task.train.vocab != spec.vocab || task.train.seq_len != spec.seq_len)
    throw ConfigError("task vocabulary/sequence length does not match the model");
  const auto batch_size = static_cast<std::size_t>(spec.batch_size);
  if (opts.epochs > 0 && task.train.size() < batch_size)
    throw ConfigError("training split holds fewer samples than one batch");
  if (plan.is_schedule()) require_valid(*plan.ladder);
  validate(plan.fixed);

  RunReport report;
  report.method = method;
  report.spec = spec;
  report.variant = task.variant;
  report.seed = opts.seed;

  std::mt19937_64 rng(opts.seed);
  ModelWeights w = ModelWeights::init(spec, rng());
  std::mt19937_64 data_rng(rng());
  std::mt19937_64 dropout_rng(rng());
  Adam adam(w, opts.adam);

  ScheduleState sched;
  PrecisionConfig cfg = plan.is_schedule() ? current_config(*plan.ladder, sched) : plan.fixed;
  const int rung0 = plan.is_schedule() ? 0 : -1;

  auto [loss0, acc0] = evaluate(spec, w, task.valid, cfg, opts.model);
  report.epochs.push_back({0, 0, std::numeric_limits<double>::quiet_NaN(), loss0, acc0, cfg, rung0, {}});
  const double initial_loss = loss0;

  const std::size_t steps_per_epoch = task.train.size() / batch_size;
  int bad_evals = 0;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    const auto order = shuffled(task.train.size(), data_rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const Batch batch = task.train.batch(order, s * batch_size, batch_size);
      StashBuffer stash;
      CostLedger step_ledger;
      QuantContext ctx{cfg, &step_ledger, &stash, &table, &profile};
      ++report.steps;
      try {
        auto r = forward_backward(spec, w, batch, ctx, opts.model, opts.model.dropout > 0 ? &dropout_rng : nullptr);
        if (!std::isfinite(r.loss)) throw NumericError("non-finite training loss");
        record_optimizer_traffic(step_ledger, w, profile, table);
        adam.step(w, r.grads, lr_schedule(adam.steps() + 1, opts.warmup, opts.base_lr));
        loss_sum += r.loss;
        ++loss_count;
      } catch (const NumericError& e) {
        report.events.push_back({report.steps, epoch, cfg, e.what()});
      }
      report.ledger += step_ledger;
    }

    const PrecisionConfig trained_with = cfg;
    const int trained_rung = plan.is_schedule() ? sched.rung : -1;
    auto [vloss, vacc] = evaluate(spec, w, task.valid, cfg, opts.model);
    const double tloss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::quiet_NaN();
    report.epochs.push_back({epoch, report.steps, tloss, vloss, vacc, trained_with, trained_rung, report.ledger});

    const bool bad = !std::isfinite(vloss) || vloss > opts.divergence_factor * initial_loss;
    bad_evals = bad ? bad_evals + 1 : 0;
    if (bad) report.events.push_back({report.steps, epoch, cfg, "validation loss diverged"});
    if (bad_evals >= opts.divergence_window) {
      report.verdict = "Failed";
      if (opts.abort_on_failure) break;
    }

    if (plan.is_schedule()) {
      auto [next, next_cfg] = observe_validation(*plan.ladder, std::move(sched), vloss, report.steps);
      sched = std::move(next);
      cfg = next_cfg;
    }
  }
  report.trace = sched.trace;
  return report;
}

std::string ledger_json(const CostLedger& ledger) { return to_json(ledger).dump(); }

std::string metrics_jsonl(const RunReport& report) {
  std::string out;
  for (const auto& m : report.epochs) {
    out += to_json(m).dump();
    out += '\n';
  }
  return out;
}

std::string summary_json(const RunReport& report) {
  ordered_json j;
  j["method"] = report.method;
  j["model"] = describe(report.spec);
  j["task"] = variant_name(report.variant);
  j["seed"] = report.seed;
  j["verdict"] = report.verdict;
  j["steps"] = report.steps;
  j["epochs"] = report.epochs.empty() ? 0 : report.epochs.back().epoch;
  j["final_valid_loss"] = number(report.final_valid_loss());
  j["final_token_acc"] = number(report.final_accuracy());
  j["ledger"] = to_json(report.ledger);
  ordered_json trace = ordered_json::array();
  for (const auto& t : report.trace) trace.push_back({{"step", t.step}, {"rung", t.rung}, {"loss", number(t.loss)}});
  j["schedule_trace"] = trace;
  ordered_json events = ordered_json::array();
  for (const auto& e : report.events)
    events.push_back({{"step", e.step}, {"epoch", e.epoch}, {"config", e.config.to_string()}, {"reason", e.reason}});
  j["divergence_events"] = events;
  return j.dump(2) + "\n";
}

}  // namespace dsq
