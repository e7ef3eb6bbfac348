#pragma once

#include <vector>

#include "dpat/rng.h"
#include "dpat/tensor.h"

namespace dpat {

// Exact (erf-based) GELU.
inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad_scalar(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

MatrixXd gelu(const MatrixXd& x);
MatrixXd gelu_backward(const MatrixXd& x, const MatrixXd& dy);

// ---------------------------------------------------------------------------
// Layer normalization (per row). gamma/beta are 1 x D and frozen here: the
// backward pass only propagates to the input.

struct LayerNormParams {
    MatrixXd gamma;  // 1 x D
    MatrixXd beta;   // 1 x D
};

struct LayerNormCache {
    MatrixXd xhat;       // normalized input
    VectorXd inv_std;    // per-row 1/sqrt(var + eps)
};

constexpr double kLayerNormEps = 1e-6;

MatrixXd layer_norm(const MatrixXd& x, const LayerNormParams& p, LayerNormCache* cache = nullptr);
MatrixXd layer_norm_backward(const LayerNormParams& p, const LayerNormCache& cache,
                             const MatrixXd& dy);

// ---------------------------------------------------------------------------
// Multi-head attention with an optional prefix prompt.
//
// The prompt is a pair of halves living in token space: the key half is
// prepended to the attention's key inputs and the value half to its value
// inputs, both passing through the frozen projections. Queries always come
// from the sequence itself, so output length equals input length.

struct AttentionWeights {
    MatrixXd wq, wk, wv, wo;  // D x D
    MatrixXd bq, bk, bv, bo;  // 1 x D
    int heads = 1;
};

struct PrefixPrompt {
    MatrixXd key;    // len x D
    MatrixXd value;  // len x D
    bool empty() const { return key.rows() == 0; }
    int len() const { return static_cast<int>(key.rows()); }
};

// Splits a full prompt parameter (L_p x D, L_p even) into its key/value
// halves. Throws InvalidPromptError on odd row counts.
PrefixPrompt split_prompt(const MatrixXd& full);

struct AttentionCache {
    int seq_len = 0;
    int n_seq = 0;
    int prefix_len = 0;
    MatrixXd q, k, v;    // projected sequence tokens, (n_seq*seq_len) x D
    MatrixXd kp, vp;     // projected prompt tokens, prefix_len x D
    std::vector<MatrixXd> probs;  // softmax rows per (seq, head): seq_len x (prefix+seq_len)
};

// x holds n_seq contiguous sequences of seq_len rows each. With an empty
// prompt this is standard multi-head self-attention.
MatrixXd prefix_msa(const MatrixXd& x, int seq_len, int n_seq, const PrefixPrompt& prompt,
                    const AttentionWeights& w, AttentionCache* cache = nullptr);

// Single-sequence convenience form.
inline MatrixXd prefix_msa(const MatrixXd& h, const PrefixPrompt& prompt,
                           const AttentionWeights& w, AttentionCache* cache = nullptr) {
    return prefix_msa(h, static_cast<int>(h.rows()), 1, prompt, w, cache);
}

struct AttentionGrads {
    MatrixXd dx;
    MatrixXd dprompt_key;    // empty if no prompt
    MatrixXd dprompt_value;
};

AttentionGrads prefix_msa_backward(const AttentionWeights& w, const AttentionCache& cache,
                                   const MatrixXd& dy);

// ---------------------------------------------------------------------------
// Frozen transformer feed-forward sublayer (no residual inside).

struct FfnWeights {
    MatrixXd w1;  // D x H
    MatrixXd b1;  // 1 x H
    MatrixXd w2;  // H x D
    MatrixXd b2;  // 1 x D
};

struct FfnCache {
    MatrixXd pre_act;  // x*w1 + b1
    MatrixXd act;      // gelu(pre_act)
};

MatrixXd ffn(const MatrixXd& x, const FfnWeights& w, FfnCache* cache = nullptr);
MatrixXd ffn_backward(const FfnWeights& w, const FfnCache& cache, const MatrixXd& dy);

// ---------------------------------------------------------------------------
// Bottleneck adapter: up(gelu(down(x))), no internal residual. Trainable.

struct AdapterParams {
    MatrixXd down_w;  // D x d
    MatrixXd down_b;  // 1 x d
    MatrixXd up_w;    // d x D
    MatrixXd up_b;    // 1 x D

    int bottleneck() const { return static_cast<int>(down_w.cols()); }

    // d = round(ratio * dim), at least 1. Up-projection starts at zero so a
    // fresh adapter leaves the network function unchanged.
    static AdapterParams init(int dim, double ratio, Rng& rng);
};

struct AdapterCache {
    MatrixXd x;
    MatrixXd pre_act;
    MatrixXd act;
};

struct AdapterGrads {
    MatrixXd down_w, down_b, up_w, up_b;
    void init_like(const AdapterParams& p);
};

MatrixXd adapter_forward(const MatrixXd& x, const AdapterParams& a, AdapterCache* cache = nullptr);
// Returns dx; accumulates parameter gradients into `grads` when non-null.
MatrixXd adapter_backward(const AdapterParams& a, const AdapterCache& cache, const MatrixXd& dy,
                          AdapterGrads* grads);

}  // namespace dpat
