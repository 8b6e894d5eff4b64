#pragma once

#include "fgpan/data_model.hpp"

#include <vector>

namespace fgpan {

/// One occupied S x S tile. offsets[k] is (row mod S, col mod S) of members[k].
struct WindowTile {
    GridCoord tile;
    std::vector<int> members;
    std::vector<GridCoord> offsets;
};

struct WindowPartition {
    int window_size = 1;
    std::vector<WindowTile> windows;
};

/// Per-head projections plus a relative-position bias table of shape
/// (2S-1) x (2S-1), indexed by (drow + S - 1, dcol + S - 1) with d = query - key.
struct AttentionHeadParams {
    Matrix w_q;
    Matrix w_k;
    Matrix w_v;
    Matrix bias_table;

    int dim() const noexcept { return static_cast<int>(w_q.rows()); }
    int window_size() const noexcept { return static_cast<int>((bias_table.rows() + 1) / 2); }
};

struct LwaParams {
    int dim = 0;
    int window_size = 1;
    std::vector<AttentionHeadParams> heads;
};

void validate(const LwaParams& params);

/// Assigns (r, c) to tile (r / S, c / S); tiles in row-major order, empty ones omitted.
WindowPartition partition_windows(const SlideRecord& slide, int window_size);
WindowPartition partition_windows(const std::vector<GridCoord>& coords, int window_size);

/// Intermediates of one head on one window, kept for the backward pass.
struct AttentionCache {
    Matrix query;
    Matrix key;
    Matrix value;
    Matrix attention;  // k x k, rows sum to 1
    Matrix output;     // k x d
};

AttentionCache attend_window_cached(const Matrix& features, const std::vector<GridCoord>& offsets,
                                    const AttentionHeadParams& head);

/// Softmax((Q K^T + B) / sqrt(d)) V over the k real members of a window.
Matrix attend_window(const Matrix& features, const std::vector<GridCoord>& offsets,
                     const AttentionHeadParams& head);

/// Accumulates parameter gradients of one head for one window given dL/dOutput.
void attend_window_backward(const Matrix& features, const std::vector<GridCoord>& offsets,
                            const AttentionCache& cache, const Matrix& grad_output,
                            AttentionHeadParams& grad_head);

/// Returns one M x d matrix per head.
std::vector<Matrix> lwa_forward(const Matrix& features, const WindowPartition& partition,
                                const LwaParams& params);

/// Gathers the rows of `features` belonging to a window.
Matrix gather_rows(const Matrix& features, const std::vector<int>& rows);

}  // namespace fgpan
