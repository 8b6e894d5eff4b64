#pragma once

#include "fgpan/linalg.hpp"

#include <vector>

namespace fgpan {

/// Scalar sigmoid gate per head: row l of `weights` and entry l of `biases`.
struct GateParams {
    Matrix weights;  // L x d
    Vector biases;   // L
};

struct FusionParams {
    Matrix weight;  // d x d
    Vector bias;    // d
};

struct GatedHead {
    double gamma = 0.0;
    Vector gated;
};

/// gamma = sigmoid(w_g . h + b_g); gated = gamma * h.
GatedHead gate_head(const Vector& h, const Eigen::Ref<const Eigen::RowVectorXd>& gate_weight, double gate_bias);

/// H = W_f (sum of gated heads) + b_f.
Vector fuse_heads(const std::vector<Vector>& gated, const FusionParams& fusion);

void validate(const GateParams& gates, int heads, int dim);
void validate(const FusionParams& fusion, int dim);

}  // namespace fgpan
