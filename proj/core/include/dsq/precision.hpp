#pragma once

#include <string>
#include <string_view>

#include "dsq/formats.hpp"

namespace dsq {

/// The four quantization points of one training step:
///   q0  forward GEMM inputs (activations and weights)
///   q1  activations stashed for the backward pass
///   q2  incoming gradient feeding the input-gradient GEMM
///   q3  gradient feeding the weight-gradient GEMM, and the width at which
///       every input gradient is flushed to DRAM
struct PrecisionConfig {
  NumberFormat q0;
  NumberFormat q1;
  NumberFormat q2;
  NumberFormat q3;

  static PrecisionConfig uniform(const NumberFormat& f) { return {f, f, f, f}; }
  static PrecisionConfig reference() { return uniform(NumberFormat::reference()); }
  /// Builds a config of one family from four element widths.
  static PrecisionConfig of(FormatKind family, int b0, int b1, int b2, int b3);

  /// Accepts either four format tokens (`bfp:16,bfp:4,bfp:4,bfp:16`) or four
  /// bare widths (`16,4,4,16`) that take `family`. Brackets and spaces are ignored.
  static PrecisionConfig parse(std::string_view text, FormatKind family);

  const NumberFormat& operator[](int i) const;

  /// "[16, 4, 4, 16]" -- the layout used in cost tables.
  std::string setup_string() const;
  /// "bfp:16,bfp:4,bfp:4,bfp:16"
  std::string to_string() const;

  /// The non-Reference family shared by all points, or Reference when every
  /// point is Reference.
  FormatKind family() const;

  friend bool operator==(const PrecisionConfig&, const PrecisionConfig&) = default;
};

/// Rejects configs that mix Fixed and Bfp points. Reference points may be
/// combined with either family (they mean "leave this point unquantized").
void validate(const PrecisionConfig& cfg);

FormatKind parse_family(std::string_view name);
std::string family_name(FormatKind kind);

}  // namespace dsq
