#include "dpat/nn.h"

#include "dpat/errors.h"

namespace dpat {

MatrixXd gelu(const MatrixXd& x) {
    return x.unaryExpr([](double v) { return gelu_scalar(v); });
}

MatrixXd gelu_backward(const MatrixXd& x, const MatrixXd& dy) {
    return dy.cwiseProduct(x.unaryExpr([](double v) { return gelu_grad_scalar(v); }));
}

MatrixXd layer_norm(const MatrixXd& x, const LayerNormParams& p, LayerNormCache* cache) {
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    MatrixXd xhat(rows, cols);
    VectorXd inv_std(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(r) = (x.row(r).array() - mean) * is;
        inv_std(r) = is;
    }
    MatrixXd y = (xhat.array().rowwise() * p.gamma.row(0).array()).rowwise() +
                 p.beta.row(0).array();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

MatrixXd layer_norm_backward(const LayerNormParams& p, const LayerNormCache& cache,
                             const MatrixXd& dy) {
    // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
    MatrixXd dxhat = dy.array().rowwise() * p.gamma.row(0).array();
    MatrixXd dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(cache.xhat.row(r)).mean();
        dx.row(r) =
            cache.inv_std(r) * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2);
    }
    return dx;
}

PrefixPrompt split_prompt(const MatrixXd& full) {
    if (full.rows() % 2 != 0) {
        throw InvalidPromptError("prompt length must be even to split into key/value halves");
    }
    PrefixPrompt p;
    const Eigen::Index half = full.rows() / 2;
    p.key = full.topRows(half);
    p.value = full.bottomRows(half);
    return p;
}

static void check_prompt(const PrefixPrompt& prompt, Eigen::Index dim) {
    if (prompt.empty()) return;
    if (prompt.value.rows() != prompt.key.rows()) {
        throw InvalidPromptError("prompt key/value halves must have matching lengths");
    }
    if (prompt.key.cols() != dim || prompt.value.cols() != dim) {
        throw InvalidPromptError("prompt width does not match embedding width");
    }
}

MatrixXd prefix_msa(const MatrixXd& x, int seq_len, int n_seq, const PrefixPrompt& prompt,
                    const AttentionWeights& w, AttentionCache* cache) {
    const Eigen::Index dim = x.cols();
    if (x.rows() != static_cast<Eigen::Index>(seq_len) * n_seq) {
        throw DimensionError("prefix_msa: rows != seq_len * n_seq");
    }
    if (dim % w.heads != 0) {
        throw DimensionError("prefix_msa: embedding width not divisible by head count");
    }
    check_prompt(prompt, dim);

    const int heads = w.heads;
    const Eigen::Index dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int plen = prompt.len();

    MatrixXd q = (x * w.wq).rowwise() + w.bq.row(0);
    MatrixXd k = (x * w.wk).rowwise() + w.bk.row(0);
    MatrixXd v = (x * w.wv).rowwise() + w.bv.row(0);
    MatrixXd kp, vp;
    if (plen > 0) {
        kp = (prompt.key * w.wk).rowwise() + w.bk.row(0);
        vp = (prompt.value * w.wv).rowwise() + w.bv.row(0);
    }

    MatrixXd ctx(x.rows(), dim);
    std::vector<MatrixXd> probs;
    probs.reserve(static_cast<std::size_t>(n_seq) * heads);

    for (int s = 0; s < n_seq; ++s) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(s) * seq_len;
        for (int h = 0; h < heads; ++h) {
            const Eigen::Index c0 = h * dh;
            auto qs = q.block(r0, c0, seq_len, dh);
            MatrixXd kf(plen + seq_len, dh);
            MatrixXd vf(plen + seq_len, dh);
            if (plen > 0) {
                kf.topRows(plen) = kp.middleCols(c0, dh);
                vf.topRows(plen) = vp.middleCols(c0, dh);
            }
            kf.bottomRows(seq_len) = k.block(r0, c0, seq_len, dh);
            vf.bottomRows(seq_len) = v.block(r0, c0, seq_len, dh);

            MatrixXd scores = (qs * kf.transpose()) * scale;
            for (Eigen::Index r = 0; r < scores.rows(); ++r) {
                const double mx = scores.row(r).maxCoeff();
                scores.row(r) = (scores.row(r).array() - mx).exp();
                scores.row(r) /= scores.row(r).sum();
            }
            ctx.block(r0, c0, seq_len, dh) = scores * vf;
            probs.push_back(std::move(scores));
        }
    }

    MatrixXd y = (ctx * w.wo).rowwise() + w.bo.row(0);
    if (cache) {
        cache->seq_len = seq_len;
        cache->n_seq = n_seq;
        cache->prefix_len = plen;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->kp = std::move(kp);
        cache->vp = std::move(vp);
        cache->probs = std::move(probs);
    }
    return y;
}

AttentionGrads prefix_msa_backward(const AttentionWeights& w, const AttentionCache& cache,
                                   const MatrixXd& dy) {
    const Eigen::Index dim = dy.cols();
    const int heads = w.heads;
    const Eigen::Index dh = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int plen = cache.prefix_len;
    const int seq_len = cache.seq_len;

    MatrixXd dctx = dy * w.wo.transpose();
    MatrixXd dq = MatrixXd::Zero(dy.rows(), dim);
    MatrixXd dk = MatrixXd::Zero(dy.rows(), dim);
    MatrixXd dv = MatrixXd::Zero(dy.rows(), dim);
    MatrixXd dkp, dvp;
    if (plen > 0) {
        dkp = MatrixXd::Zero(plen, dim);
        dvp = MatrixXd::Zero(plen, dim);
    }

    for (int s = 0; s < cache.n_seq; ++s) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(s) * seq_len;
        for (int h = 0; h < heads; ++h) {
            const Eigen::Index c0 = h * dh;
            const MatrixXd& probs = cache.probs[static_cast<std::size_t>(s) * heads + h];

            MatrixXd kf(plen + seq_len, dh);
            MatrixXd vf(plen + seq_len, dh);
            if (plen > 0) {
                kf.topRows(plen) = cache.kp.middleCols(c0, dh);
                vf.topRows(plen) = cache.vp.middleCols(c0, dh);
            }
            kf.bottomRows(seq_len) = cache.k.block(r0, c0, seq_len, dh);
            vf.bottomRows(seq_len) = cache.v.block(r0, c0, seq_len, dh);

            auto dctx_s = dctx.block(r0, c0, seq_len, dh);
            MatrixXd dprobs = dctx_s * vf.transpose();
            MatrixXd dvf = probs.transpose() * dctx_s;

            // softmax backward per row, then unscale
            MatrixXd dscores(probs.rows(), probs.cols());
            for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                const double dot = probs.row(r).dot(dprobs.row(r));
                dscores.row(r) = probs.row(r).cwiseProduct(
                    (dprobs.row(r).array() - dot).matrix());
            }
            dscores *= scale;

            dq.block(r0, c0, seq_len, dh) = dscores * kf;
            MatrixXd dkf = dscores.transpose() * cache.q.block(r0, c0, seq_len, dh);
            if (plen > 0) {
                dkp.middleCols(c0, dh) += dkf.topRows(plen);
                dvp.middleCols(c0, dh) += dvf.topRows(plen);
            }
            dk.block(r0, c0, seq_len, dh) += dkf.bottomRows(seq_len);
            dv.block(r0, c0, seq_len, dh) += dvf.bottomRows(seq_len);
        }
    }

    AttentionGrads g;
    g.dx = dq * w.wq.transpose() + dk * w.wk.transpose() + dv * w.wv.transpose();
    if (plen > 0) {
        g.dprompt_key = dkp * w.wk.transpose();
        g.dprompt_value = dvp * w.wv.transpose();
    }
    return g;
}

MatrixXd ffn(const MatrixXd& x, const FfnWeights& w, FfnCache* cache) {
    MatrixXd pre = (x * w.w1).rowwise() + w.b1.row(0);
    MatrixXd act = gelu(pre);
    MatrixXd y = (act * w.w2).rowwise() + w.b2.row(0);
    if (cache) {
        cache->pre_act = std::move(pre);
        cache->act = std::move(act);
    }
    return y;
}

MatrixXd ffn_backward(const FfnWeights& w, const FfnCache& cache, const MatrixXd& dy) {
    MatrixXd dact = dy * w.w2.transpose();
    MatrixXd dpre = gelu_backward(cache.pre_act, dact);
    return dpre * w.w1.transpose();
}

AdapterParams AdapterParams::init(int dim, double ratio, Rng& rng) {
    const int d = std::max(1, static_cast<int>(std::lround(ratio * dim)));
    AdapterParams a;
    a.down_w.resize(dim, d);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index i = 0; i < a.down_w.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.down_w.cols(); ++j) {
            a.down_w(i, j) = rng.normal(0.0, std_dev);
        }
    }
    a.down_b = MatrixXd::Zero(1, d);
    a.up_w = MatrixXd::Zero(d, dim);
    a.up_b = MatrixXd::Zero(1, dim);
    return a;
}

void AdapterGrads::init_like(const AdapterParams& p) {
    down_w = MatrixXd::Zero(p.down_w.rows(), p.down_w.cols());
    down_b = MatrixXd::Zero(p.down_b.rows(), p.down_b.cols());
    up_w = MatrixXd::Zero(p.up_w.rows(), p.up_w.cols());
    up_b = MatrixXd::Zero(p.up_b.rows(), p.up_b.cols());
}

MatrixXd adapter_forward(const MatrixXd& x, const AdapterParams& a, AdapterCache* cache) {
    if (x.cols() != a.down_w.rows()) {
        throw DimensionError("adapter_forward: trailing dimension mismatch");
    }
    MatrixXd pre = (x * a.down_w).rowwise() + a.down_b.row(0);
    MatrixXd act = gelu(pre);
    MatrixXd y = (act * a.up_w).rowwise() + a.up_b.row(0);
    if (cache) {
        cache->x = x;
        cache->pre_act = std::move(pre);
        cache->act = std::move(act);
    }
    return y;
}

MatrixXd adapter_backward(const AdapterParams& a, const AdapterCache& cache, const MatrixXd& dy,
                          AdapterGrads* grads) {
    MatrixXd dact = dy * a.up_w.transpose();
    MatrixXd dpre = gelu_backward(cache.pre_act, dact);
    if (grads) {
        grads->up_w += cache.act.transpose() * dy;
        grads->up_b += dy.colwise().sum();
        grads->down_w += cache.x.transpose() * dpre;
        grads->down_b += dpre.colwise().sum();
    }
    return dpre * a.down_w.transpose();
}

}  // namespace dpat
