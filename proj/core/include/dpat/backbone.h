#pragma once

#include <vector>

#include "dpat/nn.h"
#include "dpat/tensor.h"

namespace dpat {

struct ModelGeometry {
    int image_height = 224;
    int image_width = 224;
    int channels = 3;
    int patch = 16;
    int frames = 16;
    int dim = 768;
    int heads = 12;
    int blocks = 12;
    double mlp_ratio = 4.0;
    double adapter_ratio = 0.25;
    bool ffn_enabled = true;

    int grid_h() const { return image_height / patch; }
    int grid_w() const { return image_width / patch; }
    int patches() const { return grid_h() * grid_w(); }        // N
    int tokens() const { return patches() + 1; }               // N + 1
    int patch_dim() const { return patch * patch * channels; }
    int ffn_hidden() const { return std::max(1, static_cast<int>(std::lround(mlp_ratio * dim))); }

    void validate() const;
};

// Normalized pixel clip. Index order: frame, row, column, channel.
struct VideoClip {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    VectorXd pixels;  // frames*height*width*channels values in [0,1]
    int label = 0;

    double at(int t, int y, int x, int c) const {
        return pixels(((static_cast<Eigen::Index>(t) * height + y) * width + x) * channels + c);
    }
    double& at(int t, int y, int x, int c) {
        return pixels(((static_cast<Eigen::Index>(t) * height + y) * width + x) * channels + c);
    }
    Eigen::Index pixel_count() const {
        return static_cast<Eigen::Index>(frames) * height * width * channels;
    }
};

struct BlockWeights {
    LayerNormParams ln1;  // pre-attention norm, shared by both adapted passes
    LayerNormParams ln2;  // pre-FFN norm
    AttentionWeights attn;
    FfnWeights ffn;
};

// Every field here is frozen for the lifetime of a continual run.
struct BackboneParams {
    MatrixXd patch_proj;  // patch_dim x D
    MatrixXd patch_bias;  // 1 x D
    MatrixXd cls_token;   // 1 x D
    MatrixXd pos_embed;   // (N+1) x D
    std::vector<BlockWeights> blocks;

    static BackboneParams init(const ModelGeometry& geom, Rng& rng);
};

// Embeds each frame independently with the shared projection, prepends the
// class token and adds the positional embedding identically per frame.
TokenTensor patch_embed(const VideoClip& clip, const BackboneParams& params,
                        const ModelGeometry& geom);

// Standard per-frame ViT forward (pre-norm MSA + FFN, residuals, no prompts,
// no adapters). This is the query path: it mirrors the original pretrained
// image encoder's behavior and never sees trainable parameters.
MatrixXd plain_vit_forward(const TokenTensor& embedded, const BackboneParams& params,
                           const ModelGeometry& geom);

// Mean over per-frame class tokens.
MatrixXd pool_class_tokens(const MatrixXd& data, int frames, int tokens);

}  // namespace dpat
