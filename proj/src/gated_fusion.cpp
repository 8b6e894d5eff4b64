#include "fgpan/gated_fusion.hpp"

namespace fgpan {

GatedHead gate_head(const Vector& h, const Eigen::Ref<const Eigen::RowVectorXd>& gate_weight, double gate_bias) {
    if (gate_weight.size() != h.size()) {
        throw DimensionError("gate weight length differs from head feature length");
    }
    GatedHead out;
    out.gamma = sigmoid(gate_weight.dot(h.transpose()) + gate_bias);
    out.gated = out.gamma * h;
    return out;
}

Vector fuse_heads(const std::vector<Vector>& gated, const FusionParams& fusion) {
    if (gated.empty()) {
        throw DimensionError("fuse_heads needs at least one head");
    }
    Vector sum = Vector::Zero(fusion.weight.cols());
    for (const auto& g : gated) {
        if (g.size() != sum.size()) {
            throw DimensionError("gated head width differs from fusion input width");
        }
        sum += g;
    }
    return fusion.weight * sum + fusion.bias;
}

void validate(const GateParams& gates, int heads, int dim) {
    if (gates.weights.rows() != heads || gates.weights.cols() != dim || gates.biases.size() != heads) {
        throw DimensionError("gate parameters must be L x d weights and L biases");
    }
    if (!gates.weights.allFinite() || !gates.biases.allFinite()) {
        throw std::invalid_argument("gate parameters have non-finite values");
    }
}

void validate(const FusionParams& fusion, int dim) {
    if (fusion.weight.rows() != dim || fusion.weight.cols() != dim || fusion.bias.size() != dim) {
        throw DimensionError("fusion parameters must be a d x d weight and a d bias");
    }
    if (!fusion.weight.allFinite() || !fusion.bias.allFinite()) {
        throw std::invalid_argument("fusion parameters have non-finite values");
    }
}

}  // namespace fgpan
