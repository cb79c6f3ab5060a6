#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dsq/precision.hpp"

namespace dsq {

/// Ordered precision rungs, advanced one at a time when validation loss
/// stops improving for `patience` consecutive observations.
struct ScheduleLadder {
  std::vector<PrecisionConfig> configs;
  int patience = 2;
  double min_delta = 0.0;
};

struct TraceEntry {
  std::int64_t step = 0;
  int rung = 0;
  double loss = 0.0;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct ScheduleState {
  int rung = 0;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::int64_t non_finite = 0;  // observations rejected as non-finite
  std::vector<TraceEntry> trace;
};

/// [[2,2,2,16], [4,4,4,16], [16,4,4,16]] in `family`, patience 2, min_delta 0.
ScheduleLadder default_ladder(FormatKind family);

/// Componentwise monotonicity and the q3 >= 16 rule, plus basic shape
/// checks. Empty when the ladder is usable.
std::vector<std::string> validate_ladder(const ScheduleLadder& ladder);

/// Throws ConfigError listing every violation.
void require_valid(const ScheduleLadder& ladder);

const PrecisionConfig& current_config(const ScheduleLadder& ladder, const ScheduleState& state);

/// Pure transition: returns the next state and the config for the next
/// training interval. A non-finite loss counts as non-improvement.
std::pair<ScheduleState, PrecisionConfig> observe_validation(const ScheduleLadder& ladder, ScheduleState state,
                                                             double loss, std::int64_t step = 0);

}  // namespace dsq
