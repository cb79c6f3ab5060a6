#include "dsq/scheduler.hpp"

#include <cmath>

#include "dsq/error.hpp"

namespace dsq {

ScheduleLadder default_ladder(FormatKind family) {
  if (family == FormatKind::Reference) throw ConfigError("the default ladder needs the fixed or bfp family");
  return {{PrecisionConfig::of(family, 2, 2, 2, 16), PrecisionConfig::of(family, 4, 4, 4, 16),
           PrecisionConfig::of(family, 16, 4, 4, 16)},
          2,
          0.0};
}

std::vector<std::string> validate_ladder(const ScheduleLadder& ladder) {
  std::vector<std::string> out;
  if (ladder.configs.empty()) out.emplace_back("ladder has no rungs");
  if (ladder.patience < 1) out.emplace_back("patience must be at least 1");
  if (!(ladder.min_delta >= 0.0)) out.emplace_back("min_delta must be non-negative");
  for (std::size_t r = 0; r < ladder.configs.size(); ++r) {
    const auto& c = ladder.configs[r];
    if (c.q3.bits() < 16)
      out.push_back("rung " + std::to_string(r) + ": q3 is " + std::to_string(c.q3.bits()) +
                    " bits, gradients need at least 16");
    if (r == 0) continue;
    const auto& prev = ladder.configs[r - 1];
    for (int i = 0; i < 4; ++i) {
      if (c[i].bits() < prev[i].bits())
        out.push_back("rung " + std::to_string(r) + ": q" + std::to_string(i) + " drops from " +
                      std::to_string(prev[i].bits()) + " to " + std::to_string(c[i].bits()) + " bits");
    }
  }
  return out;
}

void require_valid(const ScheduleLadder& ladder) {
  const auto v = validate_ladder(ladder);
  if (v.empty()) return;
  std::string msg = "invalid ladder:";
  for (const auto& s : v) msg += "\n  " + s;
  throw ConfigError(msg);
}

const PrecisionConfig& current_config(const ScheduleLadder& ladder, const ScheduleState& state) {
  if (state.rung < 0 || static_cast<std::size_t>(state.rung) >= ladder.configs.size())
    throw ContractViolation("schedule rung outside the ladder");
  return ladder.configs[static_cast<std::size_t>(state.rung)];
}

std::pair<ScheduleState, PrecisionConfig> observe_validation(const ScheduleLadder& ladder, ScheduleState state,
                                                             double loss, std::int64_t step) {
  current_config(ladder, state);
  if (!std::isfinite(loss)) {
    ++state.non_finite;
    ++state.stale;
  } else if (loss < state.best - ladder.min_delta) {
    state.best = loss;
    state.stale = 0;
  } else {
    ++state.stale;
  }
  if (state.stale >= ladder.patience && static_cast<std::size_t>(state.rung) + 1 < ladder.configs.size()) {
    ++state.rung;
    state.stale = 0;
  }
  state.trace.push_back({step, state.rung, loss});
  return {state, current_config(ladder, state)};
}

}  // namespace dsq
