#include "fgpan/window_attention.hpp"

#include <cmath>
#include <map>

namespace fgpan {

namespace {

void check_partition(const WindowPartition& partition, Eigen::Index patch_count) {
    std::vector<int> hits(static_cast<std::size_t>(patch_count), 0);
    for (const auto& w : partition.windows) {
        for (int i : w.members) {
            if (i < 0 || i >= patch_count) {
                throw DimensionError("window partition refers to patch " + std::to_string(i) +
                                     " outside the slide");
            }
            ++hits[static_cast<std::size_t>(i)];
        }
    }
    for (int h : hits) {
        if (h != 1) {
            throw DimensionError("window partition does not cover every patch exactly once");
        }
    }
}

Matrix relative_bias(const std::vector<GridCoord>& offsets, const Matrix& table) {
    const int s = static_cast<int>((table.rows() + 1) / 2);
    const auto k = static_cast<Eigen::Index>(offsets.size());
    Matrix bias(k, k);
    for (Eigen::Index p = 0; p < k; ++p) {
        for (Eigen::Index q = 0; q < k; ++q) {
            const auto& a = offsets[static_cast<std::size_t>(p)];
            const auto& b = offsets[static_cast<std::size_t>(q)];
            bias(p, q) = table(a.row - b.row + s - 1, a.col - b.col + s - 1);
        }
    }
    return bias;
}

}  // namespace

void validate(const LwaParams& params) {
    if (params.heads.empty()) {
        throw std::invalid_argument("LWA needs at least one head");
    }
    const int span = 2 * params.window_size - 1;
    for (const auto& h : params.heads) {
        for (const Matrix* m : {&h.w_q, &h.w_k, &h.w_v}) {
            if (m->rows() != params.dim || m->cols() != params.dim) {
                throw DimensionError("attention projection must be d x d");
            }
            if (!m->allFinite()) {
                throw std::invalid_argument("attention projection has non-finite values");
            }
        }
        if (h.bias_table.rows() != span || h.bias_table.cols() != span) {
            throw DimensionError("bias table must be (2S-1) x (2S-1)");
        }
        if (!h.bias_table.allFinite()) {
            throw std::invalid_argument("bias table has non-finite values");
        }
    }
}

WindowPartition partition_windows(const std::vector<GridCoord>& coords, int window_size) {
    if (window_size < 1) {
        throw std::invalid_argument("window size must be >= 1");
    }
    std::map<GridCoord, WindowTile> tiles;  // ordered row-major by tile index
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const auto& c = coords[i];
        if (c.row < 0 || c.col < 0) {
            throw std::invalid_argument("partition_windows: negative coordinate");
        }
        const GridCoord tile{c.row / window_size, c.col / window_size};
        auto& w = tiles[tile];
        w.tile = tile;
        w.members.push_back(static_cast<int>(i));
        w.offsets.push_back({c.row % window_size, c.col % window_size});
    }
    WindowPartition partition;
    partition.window_size = window_size;
    partition.windows.reserve(tiles.size());
    for (auto& [_, w] : tiles) {
        partition.windows.push_back(std::move(w));
    }
    return partition;
}

WindowPartition partition_windows(const SlideRecord& slide, int window_size) {
    std::vector<GridCoord> coords;
    coords.reserve(slide.size());
    for (const auto& p : slide.patches) {
        coords.push_back(p.coord);
    }
    return partition_windows(coords, window_size);
}

AttentionCache attend_window_cached(const Matrix& features, const std::vector<GridCoord>& offsets,
                                    const AttentionHeadParams& head) {
    const auto k = features.rows();
    const int s = head.window_size();
    if (k < 1 || k > static_cast<Eigen::Index>(s) * s) {
        throw DimensionError("window holds " + std::to_string(k) + " members, expected 1..S^2");
    }
    if (features.cols() != head.dim()) {
        throw DimensionError("window feature width " + std::to_string(features.cols()) +
                             " does not match head dimension " + std::to_string(head.dim()));
    }
    if (static_cast<Eigen::Index>(offsets.size()) != k) {
        throw DimensionError("window offsets and features disagree in length");
    }
    for (const auto& o : offsets) {
        if (o.row < 0 || o.row >= s || o.col < 0 || o.col >= s) {
            throw std::invalid_argument("window offset outside [0, S)");
        }
    }

    AttentionCache c;
    c.query = features * head.w_q;
    c.key = features * head.w_k;
    c.value = features * head.w_v;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head.dim()));
    Matrix logits = (c.query * c.key.transpose() + relative_bias(offsets, head.bias_table)) * scale;
    c.attention.resize(k, k);
    for (Eigen::Index p = 0; p < k; ++p) {
        c.attention.row(p) = softmax(logits.row(p).transpose()).transpose();
    }
    c.output = c.attention * c.value;
    return c;
}

Matrix attend_window(const Matrix& features, const std::vector<GridCoord>& offsets,
                     const AttentionHeadParams& head) {
    return attend_window_cached(features, offsets, head).output;
}

void attend_window_backward(const Matrix& features, const std::vector<GridCoord>& offsets,
                            const AttentionCache& cache, const Matrix& grad_output,
                            AttentionHeadParams& grad_head) {
    const int s = static_cast<int>((grad_head.bias_table.rows() + 1) / 2);
    const double scale = 1.0 / std::sqrt(static_cast<double>(features.cols()));
    const Matrix& a = cache.attention;

    const Matrix grad_attention = grad_output * cache.value.transpose();
    const Matrix grad_value = a.transpose() * grad_output;

    // Row-wise softmax backward, then through the 1/sqrt(d) scaling.
    Matrix grad_logits(a.rows(), a.cols());
    for (Eigen::Index p = 0; p < a.rows(); ++p) {
        const double inner = a.row(p).dot(grad_attention.row(p));
        grad_logits.row(p) = (a.row(p).array() * (grad_attention.row(p).array() - inner)).matrix();
    }
    grad_logits *= scale;

    const Matrix grad_query = grad_logits * cache.key;
    const Matrix grad_key = grad_logits.transpose() * cache.query;

    grad_head.w_q.noalias() += features.transpose() * grad_query;
    grad_head.w_k.noalias() += features.transpose() * grad_key;
    grad_head.w_v.noalias() += features.transpose() * grad_value;
    for (std::size_t p = 0; p < offsets.size(); ++p) {
        for (std::size_t q = 0; q < offsets.size(); ++q) {
            grad_head.bias_table(offsets[p].row - offsets[q].row + s - 1, offsets[p].col - offsets[q].col + s - 1) +=
                grad_logits(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        }
    }
}

Matrix gather_rows(const Matrix& features, const std::vector<int>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    }
    return out;
}

std::vector<Matrix> lwa_forward(const Matrix& features, const WindowPartition& partition,
                                const LwaParams& params) {
    validate(params);
    if (features.cols() != params.dim) {
        throw DimensionError("slide features have width " + std::to_string(features.cols()) +
                             ", LWA expects d=" + std::to_string(params.dim));
    }
    if (partition.window_size != params.window_size) {
        throw DimensionError("partition window size differs from LWA window size");
    }
    check_partition(partition, features.rows());

    std::vector<Matrix> heads(params.heads.size(), Matrix::Zero(features.rows(), features.cols()));
    for (const auto& w : partition.windows) {
        const Matrix local = gather_rows(features, w.members);
        for (std::size_t l = 0; l < params.heads.size(); ++l) {
            const Matrix out = attend_window(local, w.offsets, params.heads[l]);
            for (std::size_t i = 0; i < w.members.size(); ++i) {
                heads[l].row(w.members[i]) = out.row(static_cast<Eigen::Index>(i));
            }
        }
    }
    return heads;
}

}  // namespace fgpan
