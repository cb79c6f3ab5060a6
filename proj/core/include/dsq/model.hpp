#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dsq/engine.hpp"
#include "dsq/model_spec.hpp"
#include "dsq/qlayers.hpp"

namespace dsq {

struct BlockWeights {
  Tensor ln1_gamma, ln1_beta;
  Tensor wq, wk, wv, wo;
  Tensor ln2_gamma, ln2_beta;
  Tensor ffn_in, ffn_out;
};

/// Parameters of the pre-norm encoder: token + learned position embeddings,
/// `n_layers` blocks (self-attention, FFN), final layer norm and a
/// vocabulary projection. With n_layers == 0 the model is a single linear
/// layer on top of the normalised embeddings.
struct ModelWeights {
  Tensor token_embedding;     // [vocab, d_model]
  Tensor position_embedding;  // [seq_len, d_model]
  std::vector<BlockWeights> blocks;
  Tensor final_gamma, final_beta;
  Tensor output;  // [d_model, vocab]

  static ModelWeights init(const ModelSpec& spec, std::uint64_t seed);
  static ModelWeights zeros_like(const ModelWeights& w);

  /// Flat views in a fixed order (the order names() reports).
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> names() const;
  /// True for tensors that enter a GEMM (and therefore the cost ledger).
  std::vector<bool> gemm_mask() const;
};

/// `batch_size` sequences of `seq_len` tokens, row-major.
struct Batch {
  std::vector<int> tokens;
  std::vector<int> targets;
  int batch_size = 0;
  int seq_len = 0;
};

struct ModelOptions {
  Activation activation = Activation::Gelu;
  double ln_eps = 1e-5;
  double label_smoothing = 0.1;
  double dropout = 0.0;  // applied to both residual branches when > 0
};

struct ForwardResult {
  double loss = 0.0;
  Tensor logits;  // [batch*seq, vocab]
};

/// Forward only; nothing is stashed. `ctx.ledger` is normally null here.
ForwardResult forward(const ModelSpec& spec, const ModelWeights& w, const Batch& batch,
                      const QuantContext& ctx, const ModelOptions& opts);

struct StepResult {
  double loss = 0.0;
  Tensor logits;
  ModelWeights grads;
};

/// Forward plus backward. Every GEMM goes through linear_* / matmul_*; layer
/// norm, softmax, the activation, residual adds and the embedding lookup run
/// at Reference precision. `dropout_rng` is only used when opts.dropout > 0.
StepResult forward_backward(const ModelSpec& spec, const ModelWeights& w, const Batch& batch,
                            const QuantContext& ctx, const ModelOptions& opts,
                            std::mt19937_64* dropout_rng = nullptr);

/// Fraction of positions whose argmax logit equals the target.
double token_accuracy(const Tensor& logits, std::span<const int> targets);

}  // namespace dsq
