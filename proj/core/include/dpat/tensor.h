#pragma once

#include <Eigen/Dense>

#include "dpat/errors.h"

namespace dpat {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Per-frame patch tokens plus class token. Row r = frame * tokens + slot,
// slot 0 being the class token; columns are the embedding width.
struct TokenTensor {
    int frames = 0;  // T
    int tokens = 0;  // N + 1
    MatrixXd data;   // (frames * tokens) x dim

    int dim() const { return static_cast<int>(data.cols()); }
    int rows() const { return frames * tokens; }

    Eigen::Block<MatrixXd, 1> token(int frame, int slot) {
        return data.block<1, Eigen::Dynamic>(frame * tokens + slot, 0, 1, data.cols());
    }
};

// Regroups rows so each spatial slot's frame sequence becomes contiguous:
// input row t*tokens + n maps to output row n*frames + t. Used for the
// temporal attention pass; its own inverse when applied with swapped roles.
inline MatrixXd regroup_time_major(const MatrixXd& x, int frames, int tokens) {
    if (x.rows() != static_cast<Eigen::Index>(frames) * tokens) {
        throw DimensionError("regroup_time_major: row count does not match frames*tokens");
    }
    MatrixXd out(x.rows(), x.cols());
    for (int t = 0; t < frames; ++t) {
        for (int n = 0; n < tokens; ++n) {
            out.row(static_cast<Eigen::Index>(n) * frames + t) =
                x.row(static_cast<Eigen::Index>(t) * tokens + n);
        }
    }
    return out;
}

inline MatrixXd regroup_token_major(const MatrixXd& x, int frames, int tokens) {
    if (x.rows() != static_cast<Eigen::Index>(frames) * tokens) {
        throw DimensionError("regroup_token_major: row count does not match frames*tokens");
    }
    MatrixXd out(x.rows(), x.cols());
    for (int n = 0; n < tokens; ++n) {
        for (int t = 0; t < frames; ++t) {
            out.row(static_cast<Eigen::Index>(t) * tokens + n) =
                x.row(static_cast<Eigen::Index>(n) * frames + t);
        }
    }
    return out;
}

}  // namespace dpat
