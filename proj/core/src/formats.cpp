#include "dsq/formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "dsq/error.hpp"
#include "dsq/tensor.hpp"

namespace dsq {
namespace {

// Round-half-to-even under the default FE_TONEAREST mode.
double round_even(double v) { return std::nearbyint(v); }

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("quantizer input contains a non-finite value");
    m = std::max(m, std::fabs(v));
  }
  return m;
}

double max_code(int bits) { return std::ldexp(1.0, bits - 1) - 1.0; }

int clamp_exponent(int e, int exponent_bits) {
  return std::clamp(e, bfp_exponent_min(exponent_bits), bfp_exponent_max(exponent_bits));
}

// Shared exponent of a box whose largest magnitude is `m`.
int box_exponent(double m, int exponent_bits) {
  if (m == 0.0) return bfp_exponent_min(exponent_bits);
  return clamp_exponent(std::ilogb(m), exponent_bits);
}

// Multiplying by an exact power of two matches ldexp here: grid steps stay
// within +-2^600, far from the double range limits.
void snap_on_grid(std::span<const double> x, int step_exponent, int bits, double* out) {
  const double limit = max_code(bits);
  const double down = std::ldexp(1.0, -step_exponent);
  const double up = std::ldexp(1.0, step_exponent);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double code = std::clamp(round_even(x[i] * down), -limit, limit);
    out[i] = code * up + 0.0;  // +0.0 folds -0 into 0
  }
}

// Snaps one box in place into `out`; returns the shared exponent.
int snap_box(std::span<const double> x, const NumberFormat& fmt, double* out) {
  const int e = box_exponent(max_abs(x), fmt.exponent_bits);
  snap_on_grid(x, e - (fmt.element_bits - 2), fmt.element_bits, out);
  return e;
}

}  // namespace

NumberFormat NumberFormat::fixed(int bits) {
  NumberFormat f{FormatKind::Fixed, bits, 8, 16};
  validate(f);
  return f;
}

NumberFormat NumberFormat::bfp(int bits, int exponent_bits, int box_size) {
  NumberFormat f{FormatKind::Bfp, bits, exponent_bits, box_size};
  validate(f);
  return f;
}

void validate(const NumberFormat& fmt) {
  if (fmt.kind == FormatKind::Reference) return;
  if (fmt.element_bits < 2 || fmt.element_bits > 32)
    throw ConfigError("element_bits must be in [2, 32], got " + std::to_string(fmt.element_bits));
  if (fmt.kind == FormatKind::Bfp) {
    if (fmt.exponent_bits < 2 || fmt.exponent_bits > 10)
      throw ConfigError("exponent_bits must be in [2, 10], got " +
                        std::to_string(fmt.exponent_bits));
    if (fmt.box_size < 1)
      throw ConfigError("box_size must be positive, got " + std::to_string(fmt.box_size));
  }
}

NumberFormat NumberFormat::parse(std::string_view token) {
  if (token == "ref") return reference();
  const auto colon = token.find(':');
  if (colon == std::string_view::npos)
    throw ConfigError("bad format token '" + std::string(token) + "' (expected ref, fixed:N or bfp:N)");
  const auto kind = token.substr(0, colon);
  const auto digits = token.substr(colon + 1);
  int bits = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), bits);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty())
    throw ConfigError("bad bit width in format token '" + std::string(token) + "'");
  if (kind == "fixed") return fixed(bits);
  if (kind == "bfp") return bfp(bits);
  throw ConfigError("unknown format kind '" + std::string(kind) + "'");
}

std::string NumberFormat::to_string() const {
  switch (kind) {
    case FormatKind::Reference: return "ref";
    case FormatKind::Fixed: return "fixed:" + std::to_string(element_bits);
    case FormatKind::Bfp: return "bfp:" + std::to_string(element_bits);
  }
  return "?";
}

int bfp_exponent_min(int exponent_bits) { return -((1 << (exponent_bits - 1)) - 1); }
int bfp_exponent_max(int exponent_bits) { return 1 << (exponent_bits - 1); }

QuantizedBlock snap_fixed(std::span<const double> x, int bits) {
  if (bits < 2) throw ConfigError("fixed-point needs at least 2 bits");
  const double m = max_abs(x);
  QuantizedBlock out;
  out.values.reserve(x.size());
  if (m == 0.0) {
    out.values.assign(x.size(), 0.0);
    return out;
  }
  out.scale_exponent = std::ilogb(m) + 1;
  out.values.resize(x.size());
  snap_on_grid(x, out.scale_exponent - (bits - 1), bits, out.values.data());
  return out;
}

QuantizedBlock snap_bfp(std::span<const double> x, const NumberFormat& fmt) {
  if (fmt.kind != FormatKind::Bfp) throw ContractViolation("snap_bfp needs a Bfp format");
  if (static_cast<int>(x.size()) != fmt.box_size)
    throw ContractViolation("snap_bfp expects exactly " + std::to_string(fmt.box_size) +
                            " values, got " + std::to_string(x.size()));
  return snap_bfp_partial(x, fmt);
}

QuantizedBlock snap_bfp_partial(std::span<const double> x, const NumberFormat& fmt) {
  if (static_cast<int>(x.size()) > fmt.box_size)
    throw ContractViolation("box holds more values than box_size");
  validate(fmt);
  QuantizedBlock out;
  out.values.resize(x.size());
  out.shared_exponent = snap_box(x, fmt, out.values.data());
  return out;
}

Tensor quantize_tensor(const Tensor& t, const NumberFormat& fmt, BoxAxis axis) {
  switch (fmt.kind) {
    case FormatKind::Reference:
      return t;
    case FormatKind::Fixed:
      return Tensor(t.shape(), snap_fixed(t.data(), fmt.element_bits).values);
    case FormatKind::Bfp:
      break;
  }
  validate(fmt);
  Tensor out = t;
  const auto box = static_cast<std::size_t>(fmt.box_size);
  const std::size_t rows = t.rows();
  const std::size_t cols = t.cols();
  if (axis == BoxAxis::Columns && t.rank() == 2) {
    std::vector<double> lane(box), snapped(box);
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t r0 = 0; r0 < rows; r0 += box) {
        const std::size_t n = std::min(rows, r0 + box) - r0;
        for (std::size_t r = 0; r < n; ++r) lane[r] = t(r0 + r, c);
        snap_box(std::span<const double>(lane.data(), n), fmt, snapped.data());
        for (std::size_t r = 0; r < n; ++r) out(r0 + r, c) = snapped[r];
      }
    }
    return out;
  }
  auto src = t.data();
  auto dst = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c0 = 0; c0 < cols; c0 += box) {
      const std::size_t n = std::min(cols, c0 + box) - c0;
      snap_box(src.subspan(r * cols + c0, n), fmt, dst.data() + r * cols + c0);
    }
  }
  return out;
}

std::int64_t storage_bits(const NumberFormat& fmt, std::int64_t n) {
  switch (fmt.kind) {
    case FormatKind::Reference: return n * 32;
    case FormatKind::Fixed: return n * fmt.element_bits;
    case FormatKind::Bfp: {
      const std::int64_t boxes = (n + fmt.box_size - 1) / fmt.box_size;
      return n * fmt.element_bits + boxes * fmt.exponent_bits;
    }
  }
  return 0;
}

double max_abs_error_bound(const NumberFormat& fmt, std::span<const double> block) {
  const double m = max_abs(block);
  if (m == 0.0) return 0.0;
  switch (fmt.kind) {
    case FormatKind::Reference:
      return 0.0;
    case FormatKind::Fixed:
      return std::ldexp(1.0, std::ilogb(m) + 1 - fmt.element_bits);
    case FormatKind::Bfp: {
      const int e = box_exponent(m, fmt.exponent_bits);
      return std::ldexp(1.0, e - (fmt.element_bits - 2) - 1);
    }
  }
  return 0.0;
}

}  // namespace dsq
