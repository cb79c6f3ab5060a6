#include "dsq/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dsq/error.hpp"

namespace dsq {
namespace {

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ContractViolation(std::string(what) + " must be rank 2, got " + t.shape_string());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ContractViolation(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                            b.shape_string());
}

bool is_row_vector_for(const Tensor& b, const Tensor& a) {
  if (b.cols() != a.cols()) return false;
  return b.rank() == 1 || (b.rank() == 2 && b.dim(0) == 1);
}

template <class Op>
Tensor zip(const Tensor& a, const Tensor& b, Op op, const char* what) {
  Tensor out = a;
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
    return out;
  }
  if (!is_row_vector_for(b, a))
    throw ContractViolation(std::string(what) + ": cannot broadcast " + b.shape_string() + " onto " +
                            a.shape_string());
  const std::size_t cols = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = op(a[r * cols + c], b[c]);
  return out;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor gemm(const Tensor& a, const Tensor& b) {
  require_matrix(a, "gemm lhs");
  require_matrix(b, "gemm rhs");
  if (a.dim(1) != b.dim(0))
    throw ContractViolation("gemm inner dimensions disagree: " + a.shape_string() + " * " + b.shape_string());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  auto cd = c.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = cd.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Tensor gemm_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "gemm_tn lhs");
  require_matrix(b, "gemm_tn rhs");
  if (a.dim(0) != b.dim(0))
    throw ContractViolation("gemm_tn reduction dimensions disagree: " + a.shape_string() + "^T * " +
                            b.shape_string());
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  auto cd = c.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = bd.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = ad[p * m + i];
      double* crow = cd.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
  return c;
}

Tensor gemm_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "gemm_nt lhs");
  require_matrix(b, "gemm_nt rhs");
  if (a.dim(1) != b.dim(1))
    throw ContractViolation("gemm_nt reduction dimensions disagree: " + a.shape_string() + " * " +
                            b.shape_string() + "^T");
  // Same per-element summation order as the dot-product form, but the
  // i-k-j walk over the transposed rhs vectorizes.
  return gemm(a, transpose(b));
}

Tensor transpose(const Tensor& t) {
  require_matrix(t, "transpose input");
  Tensor out({t.dim(1), t.dim(0)});
  for (std::size_t r = 0; r < t.dim(0); ++r)
    for (std::size_t c = 0; c < t.dim(1); ++c) out(c, r) = t(r, c);
  return out;
}

GemmGrads gemm_backward(const Tensor& a, const Tensor& b, const Tensor& dc) {
  if (dc.rank() != 2 || dc.dim(0) != a.dim(0) || dc.dim(1) != b.dim(1))
    throw ContractViolation("gemm_backward: upstream gradient " + dc.shape_string() +
                            " does not match output of " + a.shape_string() + " * " + b.shape_string());
  return {gemm_nt(dc, b), gemm_tn(a, dc)};
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x + y; }, "add");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x * y; }, "mul");
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require_same_shape(x, dy, "relu_backward");
  Tensor out = dy;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > 0.0)) out[i] = 0.0;
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return out;
}

Tensor gelu_backward(const Tensor& x, const Tensor& dy) {
  require_same_shape(x, dy, "gelu_backward");
  Tensor out = dy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    out[i] = dy[i] * (cdf + v * pdf);
  }
  return out;
}

Tensor activate(Activation act, const Tensor& x) {
  return act == Activation::Relu ? relu(x) : gelu(x);
}

Tensor activate_backward(Activation act, const Tensor& x, const Tensor& dy) {
  return act == Activation::Relu ? relu_backward(x, dy) : gelu_backward(x, dy);
}

Tensor sum_rows(const Tensor& dy) {
  Tensor out({dy.cols()});
  for (std::size_t r = 0; r < dy.rows(); ++r)
    for (std::size_t c = 0; c < dy.cols(); ++c) out[c] += dy[r * dy.cols() + c];
  return out;
}

Tensor softmax_rows(const Tensor& t) {
  Tensor out = t;
  const std::size_t n = t.cols();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double* row = out.data().data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < n; ++c) row[c] /= sum;
  }
  return out;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy) {
  require_same_shape(y, dy, "softmax_rows_backward");
  Tensor out = dy;
  const std::size_t n = y.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < n; ++c) dot += dy[r * n + c] * y[r * n + c];
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = y[r * n + c] * (dy[r * n + c] - dot);
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  LayerNormCache* cache) {
  if (!(eps > 0.0)) throw ContractViolation("layer_norm eps must be positive");
  const std::size_t n = x.cols();
  if (gamma.size() != n || beta.size() != n)
    throw ContractViolation("layer_norm affine parameters must have " + std::to_string(n) + " entries");
  Tensor xhat = x;
  std::vector<double> inv_std(x.rows());
  Tensor y = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += x[r * n + c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = x[r * n + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (x[r * n + c] - mean) * inv_std[r];
      xhat[r * n + c] = h;
      y[r * n + c] = gamma[c] * h + beta[c];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Tensor& gamma, const Tensor& dy) {
  require_same_shape(cache.xhat, dy, "layer_norm_backward");
  const std::size_t n = dy.cols();
  const auto nd = static_cast<double>(n);
  LayerNormGrads g{Tensor::zeros_like(dy), Tensor({n}), Tensor({n})};
  std::vector<double> dxhat(n);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    double sum = 0.0, sum_xh = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = dy[r * n + c];
      const double h = cache.xhat[r * n + c];
      g.dgamma[c] += d * h;
      g.dbeta[c] += d;
      dxhat[c] = d * gamma[c];
      sum += dxhat[c];
      sum_xh += dxhat[c] * h;
    }
    for (std::size_t c = 0; c < n; ++c)
      g.dx[r * n + c] = cache.inv_std[r] / nd * (nd * dxhat[c] - sum - cache.xhat[r * n + c] * sum_xh);
  }
  return g;
}

namespace {

void check_targets(const Tensor& logits, std::span<const int> targets, double smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ContractViolation("label smoothing must lie in [0, 1)");
  if (targets.size() != logits.rows())
    throw ContractViolation("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                            std::to_string(logits.rows()) + " rows");
  for (int t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= logits.cols())
      throw ContractViolation("cross_entropy: target index " + std::to_string(t) + " out of range");
}

}  // namespace

double cross_entropy(const Tensor& logits, std::span<const int> targets, double smoothing) {
  check_targets(logits, targets, smoothing);
  const std::size_t v = logits.cols();
  const double off = smoothing / static_cast<double>(v);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double* row = logits.data().data() + r * v;
    const double mx = *std::max_element(row, row + v);
    double sum = 0.0;
    for (std::size_t c = 0; c < v; ++c) sum += std::exp(row[c] - mx);
    const double lse = mx + std::log(sum);
    double loss = 0.0;
    for (std::size_t c = 0; c < v; ++c) {
      const double w = off + (static_cast<int>(c) == targets[r] ? 1.0 - smoothing : 0.0);
      if (w != 0.0) loss -= w * (row[c] - lse);
    }
    total += loss;
  }
  return total / static_cast<double>(logits.rows());
}

Tensor cross_entropy_backward(const Tensor& logits, std::span<const int> targets, double smoothing) {
  check_targets(logits, targets, smoothing);
  Tensor p = softmax_rows(logits);
  const std::size_t v = logits.cols();
  const double off = smoothing / static_cast<double>(v);
  const double inv_rows = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r)
    for (std::size_t c = 0; c < v; ++c) {
      const double w = off + (static_cast<int>(c) == targets[r] ? 1.0 - smoothing : 0.0);
      p[r * v + c] = (p[r * v + c] - w) * inv_rows;
    }
  return p;
}

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ContractViolation("finite difference step must be positive");
  Tensor probe = x;
  Tensor grad = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace dsq
