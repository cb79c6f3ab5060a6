#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dsq/model.hpp"

namespace dsq {

enum class CopyVariant { Copy, Reverse, Mixed };

std::string variant_name(CopyVariant v);
/// Accepts "copy", "reverse", "mixed".
CopyVariant parse_variant(const std::string& text);

/// Fixed-length token sequences and their per-position targets, row-major.
struct Dataset {
  int vocab = 0;
  int seq_len = 0;
  std::vector<int> source;
  std::vector<int> target;

  std::size_t size() const { return seq_len > 0 ? source.size() / static_cast<std::size_t>(seq_len) : 0; }
  /// Gathers the samples listed in `order[first, first + count)`.
  Batch batch(const std::vector<std::size_t>& order, std::size_t first, std::size_t count) const;
  /// Samples [first, first + count) in storage order.
  Batch slice(std::size_t first, std::size_t count) const;
};

struct CopyTask {
  CopyVariant variant = CopyVariant::Copy;
  Dataset train;
  Dataset valid;
};

/// Synthetic sequence-to-sequence pairs. Copy: target equals source.
/// Reverse: target is the source reversed. Mixed: position 0 holds marker
/// 0 (copy) or 1 (reverse) and the remaining positions are transformed
/// accordingly; the marker maps to itself.
///
/// Copy and Reverse draw tokens uniformly from the whole vocabulary; Mixed
/// reserves the two marker ids. `valid_fraction` of the samples (at least
/// one when n_samples > 1) go to the validation split.
CopyTask make_copy_task(int vocab, int seq_len, std::size_t n_samples, std::uint64_t seed,
                        CopyVariant variant = CopyVariant::Copy, double valid_fraction = 0.1);

}  // namespace dsq
