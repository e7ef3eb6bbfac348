#include "dpat/backbone.h"

#include "dpat/errors.h"

namespace dpat {

void ModelGeometry::validate() const {
    if (image_height <= 0 || image_width <= 0 || channels <= 0 || frames <= 0) {
        throw ConfigError("geometry: sizes must be positive");
    }
    if (image_height % patch != 0 || image_width % patch != 0) {
        throw ConfigError("geometry: image size must be divisible by the patch size");
    }
    if (dim % heads != 0) {
        throw ConfigError("geometry: embedding width must be divisible by head count");
    }
    if (blocks < 1) {
        throw ConfigError("geometry: at least one block required");
    }
    if (adapter_ratio <= 0.0) {
        throw ConfigError("geometry: adapter ratio must be positive");
    }
}

static MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, double std_dev, Rng& rng) {
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.normal(0.0, std_dev);
        }
    }
    return m;
}

BackboneParams BackboneParams::init(const ModelGeometry& geom, Rng& rng) {
    geom.validate();
    BackboneParams p;
    const int d = geom.dim;
    const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
    p.patch_proj = random_matrix(geom.patch_dim(), d, 1.0 / std::sqrt(geom.patch_dim()), rng);
    p.patch_bias = MatrixXd::Zero(1, d);
    p.cls_token = random_matrix(1, d, 0.02, rng);
    p.pos_embed = random_matrix(geom.tokens(), d, 0.02, rng);
    p.blocks.resize(geom.blocks);
    for (auto& blk : p.blocks) {
        blk.ln1.gamma = MatrixXd::Ones(1, d);
        blk.ln1.beta = MatrixXd::Zero(1, d);
        blk.ln2.gamma = MatrixXd::Ones(1, d);
        blk.ln2.beta = MatrixXd::Zero(1, d);
        blk.attn.heads = geom.heads;
        blk.attn.wq = random_matrix(d, d, w_std, rng);
        blk.attn.wk = random_matrix(d, d, w_std, rng);
        blk.attn.wv = random_matrix(d, d, w_std, rng);
        blk.attn.wo = random_matrix(d, d, w_std, rng);
        blk.attn.bq = MatrixXd::Zero(1, d);
        blk.attn.bk = MatrixXd::Zero(1, d);
        blk.attn.bv = MatrixXd::Zero(1, d);
        blk.attn.bo = MatrixXd::Zero(1, d);
        const int h = geom.ffn_hidden();
        blk.ffn.w1 = random_matrix(d, h, w_std, rng);
        blk.ffn.b1 = MatrixXd::Zero(1, h);
        blk.ffn.w2 = random_matrix(h, d, 1.0 / std::sqrt(static_cast<double>(h)), rng);
        blk.ffn.b2 = MatrixXd::Zero(1, d);
    }
    return p;
}

TokenTensor patch_embed(const VideoClip& clip, const BackboneParams& params,
                        const ModelGeometry& geom) {
    if (clip.height % geom.patch != 0 || clip.width % geom.patch != 0) {
        throw DimensionError("patch_embed: frame size not divisible by patch size");
    }
    if (clip.height != geom.image_height || clip.width != geom.image_width ||
        clip.channels != geom.channels) {
        throw DimensionError("patch_embed: clip geometry does not match the model");
    }
    const int gh = geom.grid_h();
    const int gw = geom.grid_w();
    const int ps = geom.patch;
    const int pd = geom.patch_dim();
    const int tokens = geom.tokens();

    TokenTensor out;
    out.frames = clip.frames;
    out.tokens = tokens;
    out.data.resize(static_cast<Eigen::Index>(clip.frames) * tokens, geom.dim);

    VectorXd patch_vec(pd);
    for (int t = 0; t < clip.frames; ++t) {
        const Eigen::Index base = static_cast<Eigen::Index>(t) * tokens;
        out.data.row(base) = params.cls_token.row(0);
        for (int py = 0; py < gh; ++py) {
            for (int px = 0; px < gw; ++px) {
                Eigen::Index idx = 0;
                for (int dy = 0; dy < ps; ++dy) {
                    for (int dx = 0; dx < ps; ++dx) {
                        for (int c = 0; c < clip.channels; ++c) {
                            patch_vec(idx++) = clip.at(t, py * ps + dy, px * ps + dx, c);
                        }
                    }
                }
                out.data.row(base + 1 + py * gw + px) =
                    patch_vec.transpose() * params.patch_proj + params.patch_bias.row(0);
            }
        }
        out.data.middleRows(base, tokens) += params.pos_embed;
    }
    return out;
}

MatrixXd plain_vit_forward(const TokenTensor& embedded, const BackboneParams& params,
                           const ModelGeometry& geom) {
    MatrixXd h = embedded.data;
    const int tokens = embedded.tokens;
    const int frames = embedded.frames;
    PrefixPrompt no_prompt;
    for (const auto& blk : params.blocks) {
        MatrixXd normed = layer_norm(h, blk.ln1);
        h += prefix_msa(normed, tokens, frames, no_prompt, blk.attn);
        if (geom.ffn_enabled) {
            h += ffn(layer_norm(h, blk.ln2), blk.ffn);
        }
    }
    return pool_class_tokens(h, frames, tokens);
}

MatrixXd pool_class_tokens(const MatrixXd& data, int frames, int tokens) {
    MatrixXd pooled = MatrixXd::Zero(1, data.cols());
    for (int t = 0; t < frames; ++t) {
        pooled += data.row(static_cast<Eigen::Index>(t) * tokens);
    }
    pooled /= static_cast<double>(frames);
    return pooled;
}

}  // namespace dpat
