#include "dsq/task.hpp"

#include <algorithm>
#include <cmath>

#include "dsq/error.hpp"

namespace dsq {

std::string variant_name(CopyVariant v) {
  switch (v) {
    case CopyVariant::Copy: return "copy";
    case CopyVariant::Reverse: return "reverse";
    case CopyVariant::Mixed: return "mixed";
  }
  return "copy";
}

CopyVariant parse_variant(const std::string& text) {
  if (text == "copy") return CopyVariant::Copy;
  if (text == "reverse") return CopyVariant::Reverse;
  if (text == "mixed") return CopyVariant::Mixed;
  throw ConfigError("unknown task variant '" + text + "' (expected copy, reverse or mixed)");
}

Batch Dataset::batch(const std::vector<std::size_t>& order, std::size_t first, std::size_t count) const {
  if (first + count > order.size()) throw ContractViolation("batch range exceeds the sample order");
  const auto s = static_cast<std::size_t>(seq_len);
  Batch b;
  b.batch_size = static_cast<int>(count);
  b.seq_len = seq_len;
  b.tokens.reserve(count * s);
  b.targets.reserve(count * s);
  for (std::size_t i = first; i < first + count; ++i) {
    const std::size_t idx = order[i];
    if (idx >= size()) throw ContractViolation("sample index out of range");
    b.tokens.insert(b.tokens.end(), source.begin() + static_cast<std::ptrdiff_t>(idx * s),
                    source.begin() + static_cast<std::ptrdiff_t>((idx + 1) * s));
    b.targets.insert(b.targets.end(), target.begin() + static_cast<std::ptrdiff_t>(idx * s),
                     target.begin() + static_cast<std::ptrdiff_t>((idx + 1) * s));
  }
  return b;
}

Batch Dataset::slice(std::size_t first, std::size_t count) const {
  std::vector<std::size_t> order(size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return batch(order, first, count);
}

CopyTask make_copy_task(int vocab, int seq_len, std::size_t n_samples, std::uint64_t seed, CopyVariant variant,
                        double valid_fraction) {
  if (vocab < 4) throw ConfigError("copy task needs a vocabulary of at least 4 tokens");
  if (seq_len < 2) throw ConfigError("copy task needs sequences of at least 2 tokens");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) throw ConfigError("valid_fraction must lie in [0, 1)");

  std::mt19937_64 rng(seed);
  const int lo = variant == CopyVariant::Mixed ? 2 : 0;
  std::uniform_int_distribution<int> token(lo, vocab - 1);
  std::bernoulli_distribution reverse_coin(0.5);
  const auto s = static_cast<std::size_t>(seq_len);

  Dataset all{vocab, seq_len, std::vector<int>(n_samples * s), std::vector<int>(n_samples * s)};
  for (std::size_t i = 0; i < n_samples; ++i) {
    int* src = all.source.data() + i * s;
    int* tgt = all.target.data() + i * s;
    bool rev = variant == CopyVariant::Reverse;
    std::size_t start = 0;
    if (variant == CopyVariant::Mixed) {
      rev = reverse_coin(rng);
      src[0] = tgt[0] = rev ? 1 : 0;
      start = 1;
    }
    for (std::size_t j = start; j < s; ++j) src[j] = token(rng);
    for (std::size_t j = start; j < s; ++j) tgt[j] = rev ? src[s - 1 - (j - start)] : src[j];
  }

  std::size_t n_valid = static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(n_samples)));
  if (valid_fraction > 0.0 && n_valid == 0 && n_samples > 1) n_valid = 1;
  const std::size_t n_train = n_samples - n_valid;
  auto split = [&](std::size_t first, std::size_t count) {
    Dataset d{vocab, seq_len, {}, {}};
    d.source.assign(all.source.begin() + static_cast<std::ptrdiff_t>(first * s),
                    all.source.begin() + static_cast<std::ptrdiff_t>((first + count) * s));
    d.target.assign(all.target.begin() + static_cast<std::ptrdiff_t>(first * s),
                    all.target.begin() + static_cast<std::ptrdiff_t>((first + count) * s));
    return d;
  };
  return {variant, split(0, n_train), split(n_train, n_valid)};
}

}  // namespace dsq
