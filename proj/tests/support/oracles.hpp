#pragma once

// Independent, deliberately naive re-implementations used as test oracles.
// None of them share code with the library.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "dsq/tensor.hpp"

namespace oracle {

using dsq::Tensor;

inline Tensor naive_gemm(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
      c(i, j) = acc;
    }
  return c;
}

inline Tensor naive_transpose(const Tensor& a) {
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t(j, i) = a(i, j);
  return t;
}

/// Largest integer e with 2^e <= m, by scanning (m > 0).
inline int floor_log2(double m) {
  int e = 0;
  while (std::ldexp(1.0, e) > m) --e;
  while (std::ldexp(1.0, e + 1) <= m) ++e;
  return e;
}

/// Nearest member of {k * step : |k| <= limit}; ties go to the even k.
/// Exhaustive over all codes.
inline double nearest_on_grid(double x, double step, long limit) {
  double best = 0.0, best_err = std::numeric_limits<double>::infinity();
  long best_k = 0;
  for (long k = -limit; k <= limit; ++k) {
    const double v = static_cast<double>(k) * step;
    const double err = std::fabs(v - x);
    if (err < best_err || (err == best_err && (k % 2 == 0) && (best_k % 2 != 0))) {
      best = v;
      best_err = err;
      best_k = k;
    }
  }
  return best + 0.0;
}

/// Fixed-point per-tensor snap: scale is the smallest power of two strictly
/// above max|x|, step = scale / 2^(bits-1).
inline std::vector<double> snap_fixed(std::span<const double> x, int bits) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  std::vector<double> out(x.size(), 0.0);
  if (m == 0.0) return out;
  const int scale = floor_log2(m) + 1;
  const double step = std::ldexp(1.0, scale - (bits - 1));
  const long limit = (1L << (bits - 1)) - 1;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = nearest_on_grid(x[i], step, limit);
  return out;
}

/// Block floating point: shared exponent floor(log2 max|x|) clamped to the
/// biased field range, step = 2^(e - (bits - 2)).
inline std::vector<double> snap_bfp(std::span<const double> x, int bits, int exponent_bits) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  const int lo = -((1 << (exponent_bits - 1)) - 1), hi = 1 << (exponent_bits - 1);
  int e = m == 0.0 ? lo : floor_log2(m);
  e = std::min(std::max(e, lo), hi);
  const double step = std::ldexp(1.0, e - (bits - 2));
  const long limit = (1L << (bits - 1)) - 1;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = nearest_on_grid(x[i], step, limit);
  return out;
}

inline long double gelu(long double x) { return 0.5L * x * (1.0L + std::erf(x / std::sqrt(2.0L))); }

inline std::vector<long double> softmax(std::span<const double> row) {
  long double mx = -std::numeric_limits<long double>::infinity();
  for (double v : row) mx = std::max<long double>(mx, v);
  std::vector<long double> out(row.size());
  long double sum = 0.0L;
  for (std::size_t i = 0; i < row.size(); ++i) sum += out[i] = std::exp(static_cast<long double>(row[i]) - mx);
  for (auto& v : out) v /= sum;
  return out;
}

inline std::vector<long double> layer_norm(std::span<const double> row, std::span<const double> gamma,
                                           std::span<const double> beta, long double eps) {
  long double mean = 0.0L, var = 0.0L;
  for (double v : row) mean += v;
  mean /= static_cast<long double>(row.size());
  for (double v : row) var += (v - mean) * (v - mean);
  var /= static_cast<long double>(row.size());
  std::vector<long double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i)
    out[i] = (row[i] - mean) / std::sqrt(var + eps) * gamma[i] + beta[i];
  return out;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> d(0.0, scale);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

/// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

/// Central-difference gradient computed independently of the library.
template <class F>
Tensor central_difference(F&& f, const Tensor& x, double eps = 1e-5) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

/// <r, t>: projects a tensor output to a scalar for gradient checks.
inline double dot(const Tensor& r, const Tensor& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += r[i] * t[i];
  return s;
}

}  // namespace oracle
