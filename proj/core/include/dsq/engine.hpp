#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dsq/tensor.hpp"

namespace dsq {

// ---------------------------------------------------------------------------
// GEMM
//
// Reduction order is fixed: C[i,j] starts at +0.0 and accumulates
// A[i,k]*B[k,j] for k = 0, 1, ..., K-1. The loop nest is i-k-j so the inner
// loop streams rows of B, but every C[i,j] still sees the same sequence of
// additions as the textbook triple loop, so results match it bit for bit.
// ---------------------------------------------------------------------------

Tensor gemm(const Tensor& a, const Tensor& b);
/// a^T * b without materialising the transpose.
Tensor gemm_tn(const Tensor& a, const Tensor& b);
/// a * b^T without materialising the transpose.
Tensor gemm_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& t);

struct GemmGrads {
  Tensor da;
  Tensor db;
};
/// VJP of C = A*B: dA = dC*B^T, dB = A^T*dC.
GemmGrads gemm_backward(const Tensor& a, const Tensor& b, const Tensor& dc);

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

/// a + b. `b` may have the same shape as `a`, or be a row vector [cols] /
/// [1, cols] broadcast over the rows of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

enum class Activation { Relu, Gelu };

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);
/// Exact GELU: x * Phi(x) with Phi the standard normal CDF (erf based).
Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& dy);
Tensor activate(Activation act, const Tensor& x);
Tensor activate_backward(Activation act, const Tensor& x, const Tensor& dy);

/// Sums the rows of `dy` into a [cols] vector: the VJP of a broadcast add.
Tensor sum_rows(const Tensor& dy);

// ---------------------------------------------------------------------------
// Softmax / layer norm / loss
// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& t);
/// Given y = softmax_rows(x), returns dx.
Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy);

struct LayerNormCache {
  Tensor xhat;                    // normalised input
  std::vector<double> inv_std;    // per row
};

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps, LayerNormCache* cache = nullptr);

struct LayerNormGrads {
  Tensor dx;
  Tensor dgamma;
  Tensor dbeta;
};
LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Tensor& gamma,
                                   const Tensor& dy);

/// Mean over rows of the label-smoothed negative log-likelihood. The smoothed
/// target puts (1 - s) + s/V on the true class and s/V everywhere else.
double cross_entropy(const Tensor& logits, std::span<const int> targets,
                     double label_smoothing);
/// d(cross_entropy)/d(logits).
Tensor cross_entropy_backward(const Tensor& logits, std::span<const int> targets,
                              double label_smoothing);

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / 2eps, one
/// coordinate at a time.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f,
                              const Tensor& x, double eps);

}  // namespace dsq
