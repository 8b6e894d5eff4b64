#pragma once

#include "fgpan/data_model.hpp"
#include "fgpan/linalg.hpp"
#include "fgpan/window_attention.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fgpan::test {

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

inline Vector random_vector(int size, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Vector v(size);
    for (auto& x : v) x = n(rng);
    return v;
}

inline AttentionHeadParams random_head(int d, int s, std::mt19937_64& rng) {
    return {random_matrix(d, d, rng, 0.5), random_matrix(d, d, rng, 0.5), random_matrix(d, d, rng, 0.5),
            random_matrix(2 * s - 1, 2 * s - 1, rng, 0.5)};
}

/// Slide with `m` patches on distinct random cells of a rows x cols grid.
inline SlideRecord random_slide(int m, int d, int rows, int cols, std::mt19937_64& rng, std::optional<int> label = {}) {
    std::vector<int> cells(static_cast<std::size_t>(rows * cols));
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
    std::shuffle(cells.begin(), cells.end(), rng);
    SlideRecord s;
    s.slide_id = "r";
    s.label = label;
    s.dim = d;
    s.grid_rows = rows;
    s.grid_cols = cols;
    for (int i = 0; i < m; ++i) {
        s.patches.push_back({{cells[i] / cols, cells[i] % cols}, random_vector(d, rng)});
    }
    return s;
}

inline PrototypeSet random_prototypes(int c, int d, std::mt19937_64& rng) {
    PrototypeSet set;
    set.dim = d;
    for (int k = 0; k < c; ++k) {
        set.prototypes.push_back({k, "c" + std::to_string(k), "c" + std::to_string(k), random_vector(d, rng).normalized()});
    }
    return set;
}

/// Plain-loop softmax((QK^T + B)/sqrt(d)) V, written without Eigen products.
inline std::vector<std::vector<double>> dense_attention(const Matrix& f, const std::vector<GridCoord>& offsets,
                                                        const AttentionHeadParams& h) {
    const int k = static_cast<int>(f.rows());
    const int d = static_cast<int>(f.cols());
    const int s = h.window_size();
    auto project = [&](const Matrix& w) {
        std::vector<std::vector<double>> out(k, std::vector<double>(d, 0.0));
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j)
                for (int t = 0; t < d; ++t) out[i][j] += f(i, t) * w(t, j);
        return out;
    };
    const auto q = project(h.w_q);
    const auto kk = project(h.w_k);
    const auto v = project(h.w_v);
    std::vector<std::vector<double>> o(k, std::vector<double>(d, 0.0));
    for (int i = 0; i < k; ++i) {
        std::vector<double> logits(k);
        for (int j = 0; j < k; ++j) {
            double dot = 0.0;
            for (int t = 0; t < d; ++t) dot += q[i][t] * kk[j][t];
            const int dr = offsets[i].row - offsets[j].row + s - 1;
            const int dc = offsets[i].col - offsets[j].col + s - 1;
            logits[j] = (dot + h.bias_table(dr, dc)) / std::sqrt(static_cast<double>(d));
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& x : logits) z += (x = std::exp(x - mx));
        for (int j = 0; j < k; ++j)
            for (int t = 0; t < d; ++t) o[i][t] += logits[j] / z * v[j][t];
    }
    return o;
}

/// Mean over slides and patches of -ln softmax(cos(f_i, T)/tau)_y, in plain loops.
inline double reference_patch_ce(const std::vector<SlideRecord>& slides, const PrototypeSet& set, double tau) {
    double total = 0.0;
    for (const auto& s : slides) {
        double slide_sum = 0.0;
        for (const auto& p : s.patches) {
            std::vector<double> z;
            for (const auto& proto : set.prototypes) {
                double dot = 0.0, nf = 0.0, nt = 0.0;
                for (int j = 0; j < s.dim; ++j) {
                    dot += p.vector[j] * proto.embedding[j];
                    nf += p.vector[j] * p.vector[j];
                    nt += proto.embedding[j] * proto.embedding[j];
                }
                z.push_back(dot / std::sqrt(nf * nt) / tau);
            }
            double mx = *std::max_element(z.begin(), z.end());
            double lse = 0.0;
            for (double x : z) lse += std::exp(x - mx);
            slide_sum += std::log(lse) + mx - z[static_cast<std::size_t>(*s.label)];
        }
        total += slide_sum / static_cast<double>(s.patches.size());
    }
    return total / static_cast<double>(slides.size());
}

inline double rel_error(double a, double b) {
    return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b)));
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("fgpan_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace fgpan::test
