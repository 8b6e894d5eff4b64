#pragma once

#include "fgpan/data_model.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace fgpan {

enum class PositionalMode { sinusoidal, learned_table };

PositionalMode parse_positional_mode(std::string_view name);  // "sin" | "table"
std::string_view to_string(PositionalMode mode);

/// Importance projector over [H_i || phi(coord_i)] and the positional encoder phi.
struct AggregationParams {
    Vector w;  // 2d
    PositionalMode mode = PositionalMode::sinusoidal;
    int grid_rows = 0;
    int grid_cols = 0;
    std::optional<Matrix> table;  // (grid_rows * grid_cols) x d, learned mode only

    int dim() const noexcept { return static_cast<int>(w.size() / 2); }
};

void validate(const AggregationParams& params);

/// 2-D sinusoidal code: for j < d/4 and omega_j = 10000^(-4j/d), slots
/// 4j..4j+3 hold sin(row w), cos(row w), sin(col w), cos(col w).
Vector positional_embedding(const GridCoord& coord, int dim);

/// phi(coord) under the configured mode.
Vector positional_embedding(const GridCoord& coord, const AggregationParams& params);

/// Row index of a coordinate inside the learned table.
Eigen::Index table_row(const GridCoord& coord, const AggregationParams& params);

/// alpha = softmax_i(w . [H_i || phi(coord_i)])
Vector patch_weights(const Matrix& features, const std::vector<GridCoord>& coords,
                     const AggregationParams& params);

/// P = sum_i alpha_i p_i, with p_i the rows of an M x C matrix.
Vector aggregate_slide(const Vector& alpha, const Matrix& patch_probs);

/// -ln P_y
double slide_loss(const Vector& slide_probs, int label);

struct SlidePrediction {
    Vector alpha;
    Vector probs;
    int predicted = 0;
};

}  // namespace fgpan
