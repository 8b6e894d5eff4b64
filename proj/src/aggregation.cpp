#include "fgpan/aggregation.hpp"

#include <cmath>

namespace fgpan {

PositionalMode parse_positional_mode(std::string_view name) {
    if (name == "sin") return PositionalMode::sinusoidal;
    if (name == "table") return PositionalMode::learned_table;
    throw std::invalid_argument("unknown positional mode '" + std::string(name) + "' (valid: sin, table)");
}

std::string_view to_string(PositionalMode mode) {
    return mode == PositionalMode::sinusoidal ? "sin" : "table";
}

void validate(const AggregationParams& params) {
    if (params.w.size() < 2 || params.w.size() % 2 != 0) {
        throw DimensionError("aggregation projector must have length 2d");
    }
    if (!params.w.allFinite()) {
        throw std::invalid_argument("aggregation projector has non-finite values");
    }
    const bool learned = params.mode == PositionalMode::learned_table;
    if (learned != params.table.has_value()) {
        throw std::invalid_argument("positional table must be present exactly in learned-table mode");
    }
    if (learned) {
        const auto cells = static_cast<Eigen::Index>(params.grid_rows) * params.grid_cols;
        if (params.grid_rows < 1 || params.grid_cols < 1 || params.table->rows() != cells ||
            params.table->cols() != params.dim()) {
            throw DimensionError("positional table must be (grid_rows * grid_cols) x d");
        }
        if (!params.table->allFinite()) {
            throw std::invalid_argument("positional table has non-finite values");
        }
    } else if (params.dim() % 4 != 0) {
        throw DimensionError("sinusoidal positional encoding needs d divisible by 4");
    }
}

Vector positional_embedding(const GridCoord& coord, int dim) {
    if (dim < 4 || dim % 4 != 0) {
        throw DimensionError("sinusoidal positional encoding needs d divisible by 4, got " + std::to_string(dim));
    }
    Vector out(dim);
    for (int j = 0; j < dim / 4; ++j) {
        const double omega = std::pow(10000.0, -4.0 * j / dim);
        out[4 * j] = std::sin(coord.row * omega);
        out[4 * j + 1] = std::cos(coord.row * omega);
        out[4 * j + 2] = std::sin(coord.col * omega);
        out[4 * j + 3] = std::cos(coord.col * omega);
    }
    return out;
}

Eigen::Index table_row(const GridCoord& coord, const AggregationParams& params) {
    if (coord.row < 0 || coord.col < 0 || coord.row >= params.grid_rows || coord.col >= params.grid_cols) {
        throw std::out_of_range("coordinate (" + std::to_string(coord.row) + ", " + std::to_string(coord.col) +
                                ") outside the learned positional table");
    }
    return static_cast<Eigen::Index>(coord.row) * params.grid_cols + coord.col;
}

Vector positional_embedding(const GridCoord& coord, const AggregationParams& params) {
    if (params.mode == PositionalMode::sinusoidal) {
        return positional_embedding(coord, params.dim());
    }
    return params.table->row(table_row(coord, params)).transpose();
}

Vector patch_weights(const Matrix& features, const std::vector<GridCoord>& coords,
                     const AggregationParams& params) {
    validate(params);
    const int d = params.dim();
    if (features.rows() < 1) {
        throw std::invalid_argument("patch_weights needs at least one patch");
    }
    if (features.cols() != d) {
        throw DimensionError("aggregation projector has length " + std::to_string(params.w.size()) +
                             ", features need 2*" + std::to_string(features.cols()));
    }
    if (static_cast<Eigen::Index>(coords.size()) != features.rows()) {
        throw DimensionError("patch_weights: coordinate count differs from feature rows");
    }
    Vector logits(features.rows());
    const auto w_feat = params.w.head(d);
    const auto w_pos = params.w.tail(d);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        logits[i] = features.row(i).dot(w_feat) +
                    positional_embedding(coords[static_cast<std::size_t>(i)], params).dot(w_pos);
    }
    return softmax(logits);
}

Vector aggregate_slide(const Vector& alpha, const Matrix& patch_probs) {
    if (alpha.size() != patch_probs.rows()) {
        throw DimensionError("aggregate_slide: " + std::to_string(alpha.size()) + " weights for " +
                             std::to_string(patch_probs.rows()) + " patches");
    }
    return patch_probs.transpose() * alpha;
}

double slide_loss(const Vector& slide_probs, int label) {
    if (label < 0 || label >= slide_probs.size()) {
        throw std::out_of_range("slide_loss: label " + std::to_string(label) + " outside 0.." +
                                std::to_string(slide_probs.size() - 1));
    }
    return -std::log(slide_probs[label]);
}

}  // namespace fgpan
