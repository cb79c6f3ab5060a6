#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsq {

class Tensor;

enum class FormatKind { Reference, Fixed, Bfp };

/// A simulated numeric format. Reference is the wide host arithmetic and is
/// treated as 32 bits wide for storage and cost purposes.
struct NumberFormat {
  FormatKind kind = FormatKind::Reference;
  int element_bits = 32;
  int exponent_bits = 8;
  int box_size = 16;

  static NumberFormat reference() { return {}; }
  static NumberFormat fixed(int bits);
  static NumberFormat bfp(int bits, int exponent_bits = 8, int box_size = 16);

  /// Parses `ref`, `fixed:<bits>` or `bfp:<bits>`.
  static NumberFormat parse(std::string_view token);
  std::string to_string() const;

  /// Element width used for ordering rungs and indexing cost tables.
  int bits() const { return kind == FormatKind::Reference ? 32 : element_bits; }

  friend bool operator==(const NumberFormat&, const NumberFormat&) = default;
};

/// Throws ConfigError when element_bits/exponent_bits/box_size are out of range.
void validate(const NumberFormat& fmt);

/// Snapped contents of one quantizer box (Bfp) or one tensor (Fixed).
struct QuantizedBlock {
  std::vector<double> values;
  int shared_exponent = 0;  // Bfp: e such that the grid step is 2^(e - (bits - 2))
  int scale_exponent = 0;   // Fixed: per-tensor scale s = 2^scale_exponent
};

/// Inclusive range of the shared exponent for a given exponent width,
/// i.e. the unbiased range of an IEEE-style biased field: [-(2^(w-1)-1), 2^(w-1)].
int bfp_exponent_min(int exponent_bits);
int bfp_exponent_max(int exponent_bits);

/// Power-of-two per-tensor fixed-point quantizer. The scale is the smallest
/// power of two strictly greater than max|x|, so the largest magnitude always
/// lands strictly inside the symmetric code range [-(2^(b-1)-1), 2^(b-1)-1].
QuantizedBlock snap_fixed(std::span<const double> x, int bits);

/// Quantizes exactly one bounding box. `x.size()` must equal fmt.box_size.
QuantizedBlock snap_bfp(std::span<const double> x, const NumberFormat& fmt);

/// Same as snap_bfp but accepts a short trailing box; missing lanes are
/// implicitly zero and only affect the exponent choice.
QuantizedBlock snap_bfp_partial(std::span<const double> x, const NumberFormat& fmt);

/// Direction along which Bfp boxes are laid out for a rank-2 tensor.
enum class BoxAxis {
  Rows,     // boxes run along the innermost (contiguous) dimension
  Columns,  // boxes run down each column; used when dim 0 is the GEMM reduction
};

/// Reference: identity. Fixed: one scale for the whole tensor. Bfp: per box
/// along `axis` (rank-1 and rank>2 tensors always box the innermost dim).
Tensor quantize_tensor(const Tensor& t, const NumberFormat& fmt,
                       BoxAxis axis = BoxAxis::Rows);

/// Bits needed to store n elements in `fmt` (without cost-table overrides).
std::int64_t storage_bits(const NumberFormat& fmt, std::int64_t n_elements);

/// Half the grid step that snapping `block` to `fmt` would use. Any element
/// that is not clamped moves by at most this much.
double max_abs_error_bound(const NumberFormat& fmt, std::span<const double> block);

}  // namespace dsq
