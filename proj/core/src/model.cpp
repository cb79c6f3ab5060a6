#include "dsq/model.hpp"

#include <algorithm>
#include <cmath>

#include "dsq/error.hpp"

namespace dsq {

void validate(const ModelSpec& s) {
  if (s.n_layers < 0) throw ConfigError("n_layers must be non-negative");
  if (s.d_model <= 0 || s.n_heads <= 0 || s.d_ff <= 0 || s.vocab <= 0 || s.seq_len <= 0 || s.batch_size <= 0)
    throw ConfigError("model dimensions must be positive: " + describe(s));
  if (s.d_model % s.n_heads != 0)
    throw ConfigError("d_model (" + std::to_string(s.d_model) + ") must be divisible by n_heads (" +
                      std::to_string(s.n_heads) + ")");
}

std::string describe(const ModelSpec& s) {
  return "layers=" + std::to_string(s.n_layers) + " d_model=" + std::to_string(s.d_model) +
         " heads=" + std::to_string(s.n_heads) + " d_ff=" + std::to_string(s.d_ff) +
         " vocab=" + std::to_string(s.vocab) + " seq=" + std::to_string(s.seq_len) +
         " batch=" + std::to_string(s.batch_size);
}

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor ones(std::size_t n) { return Tensor({n}, 1.0); }

template <class W, class T>
std::vector<T> flat(W& w) {
  std::vector<T> out{&w.token_embedding, &w.position_embedding};
  for (auto& b : w.blocks)
    for (T t : {&b.ln1_gamma, &b.ln1_beta, &b.wq, &b.wk, &b.wv, &b.wo, &b.ln2_gamma, &b.ln2_beta, &b.ffn_in,
                &b.ffn_out})
      out.push_back(t);
  out.push_back(&w.final_gamma);
  out.push_back(&w.final_beta);
  out.push_back(&w.output);
  return out;
}

}  // namespace

ModelWeights ModelWeights::init(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  const auto d = static_cast<std::size_t>(spec.d_model);
  const auto f = static_cast<std::size_t>(spec.d_ff);
  const auto v = static_cast<std::size_t>(spec.vocab);
  const double proj = 1.0 / std::sqrt(static_cast<double>(d));
  ModelWeights w;
  w.token_embedding = random_matrix(v, d, 1.0, rng);
  w.position_embedding = random_matrix(static_cast<std::size_t>(spec.seq_len), d, 1.0, rng);
  for (int l = 0; l < spec.n_layers; ++l) {
    BlockWeights b;
    b.ln1_gamma = ones(d);
    b.ln1_beta = Tensor({d});
    b.wq = random_matrix(d, d, proj, rng);
    b.wk = random_matrix(d, d, proj, rng);
    b.wv = random_matrix(d, d, proj, rng);
    b.wo = random_matrix(d, d, proj, rng);
    b.ln2_gamma = ones(d);
    b.ln2_beta = Tensor({d});
    b.ffn_in = random_matrix(d, f, proj, rng);
    b.ffn_out = random_matrix(f, d, 1.0 / std::sqrt(static_cast<double>(f)), rng);
    w.blocks.push_back(std::move(b));
  }
  w.final_gamma = ones(d);
  w.final_beta = Tensor({d});
  w.output = random_matrix(d, v, proj, rng);
  return w;
}

ModelWeights ModelWeights::zeros_like(const ModelWeights& src) {
  ModelWeights out = src;
  for (auto* t : out.tensors()) std::fill(t->data().begin(), t->data().end(), 0.0);
  return out;
}

std::vector<Tensor*> ModelWeights::tensors() { return flat<ModelWeights, Tensor*>(*this); }
std::vector<const Tensor*> ModelWeights::tensors() const { return flat<const ModelWeights, const Tensor*>(*this); }

std::vector<std::string> ModelWeights::names() const {
  std::vector<std::string> out{"token_embedding", "position_embedding"};
  for (std::size_t l = 0; l < blocks.size(); ++l)
    for (const char* n : {"ln1_gamma", "ln1_beta", "wq", "wk", "wv", "wo", "ln2_gamma", "ln2_beta", "ffn_in", "ffn_out"})
      out.push_back("block" + std::to_string(l) + "." + n);
  out.insert(out.end(), {"final_gamma", "final_beta", "output"});
  return out;
}

std::vector<bool> ModelWeights::gemm_mask() const {
  std::vector<bool> out;
  for (const auto& n : names()) {
    const auto leaf = n.substr(n.find('.') == std::string::npos ? 0 : n.find('.') + 1);
    out.push_back(leaf == "wq" || leaf == "wk" || leaf == "wv" || leaf == "wo" || leaf == "ffn_in" ||
                  leaf == "ffn_out" || leaf == "output");
  }
  return out;
}

namespace {

Tensor block_of(const Tensor& t, std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) {
  Tensor out({nr, nc});
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) out(r, c) = t(r0 + r, c0 + c);
  return out;
}

void put_block(Tensor& dst, const Tensor& src, std::size_t r0, std::size_t c0) {
  for (std::size_t r = 0; r < src.dim(0); ++r)
    for (std::size_t c = 0; c < src.dim(1); ++c) dst(r0 + r, c0 + c) = src(r, c);
}

void add_in_place(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor dropout_mask(std::size_t rows, std::size_t cols, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  Tensor m({rows, cols});
  const double s = 1.0 / (1.0 - p);
  for (auto& v : m.data()) v = keep(rng) ? s : 0.0;
  return m;
}

struct BlockCache {
  LayerNormCache ln1, ln2;
  Tensor q, k, v;
  std::vector<Tensor> probs;  // one [seq, seq] per (sequence, head)
  Tensor attn_mask, ffn_mask;
  Tensor pre_act;
};

struct Cache {
  std::vector<BlockCache> blocks;
  LayerNormCache final_ln;
};

std::string site(int layer, const char* name) { return "block" + std::to_string(layer) + "." + name; }

std::string head_site(int layer, const char* name, std::size_t seq, std::size_t head) {
  return site(layer, name) + "." + std::to_string(seq) + "." + std::to_string(head);
}

void check_batch(const ModelSpec& spec, const Batch& batch) {
  const auto n = static_cast<std::size_t>(batch.batch_size) * static_cast<std::size_t>(batch.seq_len);
  if (batch.seq_len != spec.seq_len || batch.batch_size <= 0 || batch.tokens.size() != n || batch.targets.size() != n)
    throw ContractViolation("batch does not match model spec (" + describe(spec) + ")");
  for (int t : batch.tokens)
    if (t < 0 || t >= spec.vocab) throw ContractViolation("token id out of vocabulary range");
}

// Shared forward; fills `cache` when non-null (training).
Tensor forward_logits(const ModelSpec& spec, const ModelWeights& w, const Batch& batch, const QuantContext& ctx,
                      const ModelOptions& opts, std::mt19937_64* rng, Cache* cache) {
  check_batch(spec, batch);
  const auto seqs = static_cast<std::size_t>(batch.batch_size);
  const auto s = static_cast<std::size_t>(spec.seq_len);
  const auto d = static_cast<std::size_t>(spec.d_model);
  const auto heads = static_cast<std::size_t>(spec.n_heads);
  const auto dh = static_cast<std::size_t>(spec.head_dim());
  const std::size_t m = seqs * s;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = opts.dropout > 0.0 && rng != nullptr;

  Tensor h({m, d});
  for (std::size_t i = 0; i < m; ++i) {
    const auto tok = static_cast<std::size_t>(batch.tokens[i]);
    for (std::size_t c = 0; c < d; ++c) h(i, c) = w.token_embedding(tok, c) + w.position_embedding(i % s, c);
  }

  if (cache) cache->blocks.resize(w.blocks.size());
  for (std::size_t l = 0; l < w.blocks.size(); ++l) {
    const auto& b = w.blocks[l];
    const int li = static_cast<int>(l);
    BlockCache local;
    BlockCache& bc = cache ? cache->blocks[l] : local;

    const Tensor a = layer_norm(h, b.ln1_gamma, b.ln1_beta, opts.ln_eps, &bc.ln1);
    bc.q = linear_forward(a, b.wq, ctx, site(li, "wq"));
    bc.k = linear_forward(a, b.wk, ctx, site(li, "wk"));
    bc.v = linear_forward(a, b.wv, ctx, site(li, "wv"));

    Tensor attn({m, d});
    bc.probs.clear();
    for (std::size_t sq = 0; sq < seqs; ++sq) {
      for (std::size_t hd = 0; hd < heads; ++hd) {
        const Tensor qh = block_of(bc.q, sq * s, s, hd * dh, dh);
        const Tensor kt = transpose(block_of(bc.k, sq * s, s, hd * dh, dh));
        const Tensor vh = block_of(bc.v, sq * s, s, hd * dh, dh);
        Tensor p = softmax_rows(scale(matmul_forward(qh, kt, ctx, head_site(li, "scores", sq, hd)), inv_sqrt_dh));
        put_block(attn, matmul_forward(p, vh, ctx, head_site(li, "context", sq, hd)), sq * s, hd * dh);
        if (cache) bc.probs.push_back(std::move(p));
      }
    }
    Tensor o = linear_forward(attn, b.wo, ctx, site(li, "wo"));
    if (drop) {
      bc.attn_mask = dropout_mask(m, d, opts.dropout, *rng);
      o = mul(o, bc.attn_mask);
    }
    h = add(h, o);

    const Tensor c = layer_norm(h, b.ln2_gamma, b.ln2_beta, opts.ln_eps, &bc.ln2);
    bc.pre_act = linear_forward(c, b.ffn_in, ctx, site(li, "ffn_in"));
    Tensor f = linear_forward(activate(opts.activation, bc.pre_act), b.ffn_out, ctx, site(li, "ffn_out"));
    if (drop) {
      bc.ffn_mask = dropout_mask(m, d, opts.dropout, *rng);
      f = mul(f, bc.ffn_mask);
    }
    h = add(h, f);
  }

  LayerNormCache fl;
  const Tensor hf = layer_norm(h, w.final_gamma, w.final_beta, opts.ln_eps, cache ? &cache->final_ln : &fl);
  return linear_forward(hf, w.output, ctx, "output");
}

}  // namespace

ForwardResult forward(const ModelSpec& spec, const ModelWeights& w, const Batch& batch, const QuantContext& ctx,
                      const ModelOptions& opts) {
  QuantContext eval = ctx;
  eval.stash = nullptr;
  ForwardResult r;
  r.logits = forward_logits(spec, w, batch, eval, opts, nullptr, nullptr);
  r.loss = cross_entropy(r.logits, batch.targets, opts.label_smoothing);
  return r;
}

StepResult forward_backward(const ModelSpec& spec, const ModelWeights& w, const Batch& batch, const QuantContext& ctx,
                            const ModelOptions& opts, std::mt19937_64* dropout_rng) {
  if (!ctx.stash) throw ContractViolation("forward_backward needs a stash buffer");
  Cache cache;
  StepResult r;
  r.logits = forward_logits(spec, w, batch, ctx, opts, dropout_rng, &cache);
  r.loss = cross_entropy(r.logits, batch.targets, opts.label_smoothing);
  r.grads = ModelWeights::zeros_like(w);
  ModelWeights& g = r.grads;

  const auto seqs = static_cast<std::size_t>(batch.batch_size);
  const auto s = static_cast<std::size_t>(spec.seq_len);
  const auto d = static_cast<std::size_t>(spec.d_model);
  const auto heads = static_cast<std::size_t>(spec.n_heads);
  const auto dh = static_cast<std::size_t>(spec.head_dim());
  const std::size_t m = seqs * s;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = opts.dropout > 0.0 && dropout_rng != nullptr;

  const Tensor dlogits = cross_entropy_backward(r.logits, batch.targets, opts.label_smoothing);
  auto out = linear_backward(dlogits, w.output, ctx, "output");
  g.output = std::move(out.dw);
  auto lnf = layer_norm_backward(cache.final_ln, w.final_gamma, out.dx);
  g.final_gamma = std::move(lnf.dgamma);
  g.final_beta = std::move(lnf.dbeta);
  Tensor dh_res = std::move(lnf.dx);

  for (std::size_t l = w.blocks.size(); l-- > 0;) {
    const auto& b = w.blocks[l];
    auto& gb = g.blocks[l];
    auto& bc = cache.blocks[l];
    const int li = static_cast<int>(l);

    // FFN branch
    Tensor df = drop ? mul(dh_res, bc.ffn_mask) : dh_res;
    auto fo = linear_backward(df, b.ffn_out, ctx, site(li, "ffn_out"));
    gb.ffn_out = std::move(fo.dw);
    auto fi = linear_backward(activate_backward(opts.activation, bc.pre_act, fo.dx), b.ffn_in, ctx, site(li, "ffn_in"));
    gb.ffn_in = std::move(fi.dw);
    auto ln2 = layer_norm_backward(bc.ln2, b.ln2_gamma, fi.dx);
    gb.ln2_gamma = std::move(ln2.dgamma);
    gb.ln2_beta = std::move(ln2.dbeta);
    add_in_place(dh_res, ln2.dx);

    // attention branch
    Tensor dout = drop ? mul(dh_res, bc.attn_mask) : dh_res;
    auto wo = linear_backward(dout, b.wo, ctx, site(li, "wo"));
    gb.wo = std::move(wo.dw);
    Tensor dq({m, d}), dk({m, d}), dv({m, d});
    for (std::size_t sq = seqs; sq-- > 0;) {
      for (std::size_t hd = heads; hd-- > 0;) {
        const Tensor dctx = block_of(wo.dx, sq * s, s, hd * dh, dh);
        auto cg = matmul_backward(dctx, ctx, head_site(li, "context", sq, hd));
        const Tensor& p = bc.probs[sq * heads + hd];
        const Tensor dscores = scale(softmax_rows_backward(p, cg.da), inv_sqrt_dh);
        auto sg = matmul_backward(dscores, ctx, head_site(li, "scores", sq, hd));
        put_block(dq, sg.da, sq * s, hd * dh);
        put_block(dk, transpose(sg.db), sq * s, hd * dh);
        put_block(dv, cg.db, sq * s, hd * dh);
      }
    }
    auto gv = linear_backward(dv, b.wv, ctx, site(li, "wv"));
    auto gk = linear_backward(dk, b.wk, ctx, site(li, "wk"));
    auto gq = linear_backward(dq, b.wq, ctx, site(li, "wq"));
    gb.wq = std::move(gq.dw);
    gb.wk = std::move(gk.dw);
    gb.wv = std::move(gv.dw);
    Tensor da = gq.dx;
    add_in_place(da, gk.dx);
    add_in_place(da, gv.dx);
    auto ln1 = layer_norm_backward(bc.ln1, b.ln1_gamma, da);
    gb.ln1_gamma = std::move(ln1.dgamma);
    gb.ln1_beta = std::move(ln1.dbeta);
    add_in_place(dh_res, ln1.dx);
  }

  for (std::size_t i = 0; i < m; ++i) {
    const auto tok = static_cast<std::size_t>(batch.tokens[i]);
    for (std::size_t c = 0; c < d; ++c) {
      g.token_embedding(tok, c) += dh_res(i, c);
      g.position_embedding(i % s, c) += dh_res(i, c);
    }
  }
  return r;
}

double token_accuracy(const Tensor& logits, std::span<const int> targets) {
  if (targets.size() != logits.rows()) throw ContractViolation("token_accuracy: row/target count mismatch");
  if (targets.empty()) return 0.0;
  std::size_t hits = 0;
  const std::size_t v = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.data().subspan(r * v, v);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == targets[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

}  // namespace dsq
