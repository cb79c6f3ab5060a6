#pragma once

#include <stdexcept>
#include <string>

namespace dsq {

// Bad user-supplied configuration: format tokens, cost tables, run configs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an operation's precondition (shape mismatch, double stash, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input data that cannot be processed, e.g. NaN or infinity handed to a quantizer.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace dsq
