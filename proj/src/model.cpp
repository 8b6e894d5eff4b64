#include "fgpan/model.hpp"

#include "fgpan/prototypes.hpp"

#include <cmath>
#include <random>

namespace fgpan {

void validate(const ModelParams& params) {
    validate(params.lwa);
    validate(params.gates, params.heads(), params.dim());
    validate(params.fusion, params.dim());
    validate(params.agg);
    if (params.agg.dim() != params.dim()) {
        throw DimensionError("aggregation projector length must be 2d");
    }
    if (!std::isfinite(params.temp.log_tau)) {
        throw std::invalid_argument("log temperature is not finite");
    }
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed, double initial_tau) {
    if (shape.dim < 1 || shape.window_size < 1 || shape.heads < 1) {
        throw std::invalid_argument("init_params: d, S and L must be positive");
    }
    if (shape.pos_mode == PositionalMode::sinusoidal && shape.dim % 4 != 0) {
        throw DimensionError("init_params: sinusoidal positions need d divisible by 4");
    }
    if (shape.pos_mode == PositionalMode::learned_table && (shape.grid_rows < 1 || shape.grid_cols < 1)) {
        throw std::invalid_argument("init_params: learned positional table needs positive grid dims");
    }

    std::mt19937_64 rng(seed);
    const int d = shape.dim;
    std::normal_distribution<double> proj(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    auto random_matrix = [&](Eigen::Index rows, Eigen::Index cols, std::normal_distribution<double>& dist) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = dist(rng);
        }
        return m;
    };

    ModelParams p;
    p.lwa.dim = d;
    p.lwa.window_size = shape.window_size;
    const int span = 2 * shape.window_size - 1;
    for (int l = 0; l < shape.heads; ++l) {
        AttentionHeadParams h;
        h.w_q = random_matrix(d, d, proj);
        h.w_k = random_matrix(d, d, proj);
        h.w_v = shape.identity_value_init ? Matrix(Matrix::Identity(d, d)) : random_matrix(d, d, proj);
        h.bias_table = Matrix::Zero(span, span);
        p.lwa.heads.push_back(std::move(h));
    }
    p.gates.weights = Matrix::Zero(shape.heads, d);
    p.gates.biases = Vector::Zero(shape.heads);
    p.fusion.weight = Matrix::Identity(d, d);
    p.fusion.bias = Vector::Zero(d);
    p.temp = TemperatureParam::from_tau(initial_tau);
    p.agg.w = Vector::Zero(2 * d);
    p.agg.mode = shape.pos_mode;
    p.agg.grid_rows = shape.grid_rows;
    p.agg.grid_cols = shape.grid_cols;
    if (shape.pos_mode == PositionalMode::learned_table) {
        std::normal_distribution<double> small(0.0, 0.02);
        p.agg.table = random_matrix(static_cast<Eigen::Index>(shape.grid_rows) * shape.grid_cols, d, small);
    }
    return p;
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams z = params;
    for_each_leaf(z, [](const std::string&, std::span<double> v, bool) {
        std::fill(v.begin(), v.end(), 0.0);
    });
    return z;
}

std::size_t scalar_count(const ModelParams& params) {
    std::size_t n = 0;
    for_each_leaf(params, [&](const std::string&, std::span<const double> v, bool) { n += v.size(); });
    return n;
}

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> flat;
    flat.reserve(scalar_count(params));
    for_each_leaf(params, [&](const std::string&, std::span<const double> v, bool) {
        flat.insert(flat.end(), v.begin(), v.end());
    });
    return flat;
}

void unflatten(std::span<const double> flat, ModelParams& params) {
    if (flat.size() != scalar_count(params)) {
        throw DimensionError("flat parameter vector has the wrong length");
    }
    std::size_t offset = 0;
    for_each_leaf(params, [&](const std::string&, std::span<double> v, bool) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.begin());
        offset += v.size();
    });
}

namespace {

/// Everything the backward pass needs from one slide's forward pass.
struct SlideTrace {
    std::vector<GridCoord> coords;
    Matrix features;
    WindowPartition partition;
    std::vector<std::vector<AttentionCache>> attention;  // [window][head]
    std::vector<Matrix> head_out;                        // [head] M x d
    Matrix gamma;                                        // M x L
    Matrix gated_sum;                                    // M x d
    Matrix refined;                                      // M x d
    Vector refined_norm;                                 // M
    Matrix scores;                                       // M x C
    Matrix probs;                                        // M x C
    Matrix positions;                                    // M x d
    Vector alpha;                                        // M
    Vector slide_probs;                                  // C
};

void check_inputs(const SlideRecord& slide, const ModelParams& params, const PrototypeSet& set) {
    validate(slide);
    if (slide.dim != params.dim()) {
        throw DimensionError("slide '" + slide.slide_id + "' has d=" + std::to_string(slide.dim) +
                             ", model expects d=" + std::to_string(params.dim()));
    }
    if (set.dim != params.dim()) {
        throw DimensionError("prototype dimension " + std::to_string(set.dim) + " differs from model d=" +
                             std::to_string(params.dim()));
    }
    if (!is_normalized(set)) {
        throw std::invalid_argument("forward pass expects normalized prototypes");
    }
}

SlideTrace trace_forward(const SlideRecord& slide, const ModelParams& params, const Matrix& prototypes,
                         const ForwardOptions& options) {
    SlideTrace t;
    const auto m = static_cast<Eigen::Index>(slide.size());
    const int d = params.dim();
    t.coords.reserve(slide.size());
    for (const auto& p : slide.patches) {
        t.coords.push_back(p.coord);
    }
    t.features = slide.feature_matrix();

    if (options.lwa_gff) {
        t.partition = partition_windows(t.coords, params.window_size());
        const auto heads = static_cast<std::size_t>(params.heads());
        t.head_out.assign(heads, Matrix::Zero(m, d));
        t.attention.resize(t.partition.windows.size());
        for (std::size_t w = 0; w < t.partition.windows.size(); ++w) {
            const auto& win = t.partition.windows[w];
            const Matrix local = gather_rows(t.features, win.members);
            for (std::size_t l = 0; l < heads; ++l) {
                t.attention[w].push_back(attend_window_cached(local, win.offsets, params.lwa.heads[l]));
                const Matrix& out = t.attention[w].back().output;
                for (std::size_t i = 0; i < win.members.size(); ++i) {
                    t.head_out[l].row(win.members[i]) = out.row(static_cast<Eigen::Index>(i));
                }
            }
        }

        t.gamma.resize(m, static_cast<Eigen::Index>(heads));
        t.gated_sum = Matrix::Zero(m, d);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (std::size_t l = 0; l < heads; ++l) {
                const auto li = static_cast<Eigen::Index>(l);
                const GatedHead g = gate_head(t.head_out[l].row(i).transpose(), params.gates.weights.row(li),
                                              params.gates.biases[li]);
                t.gamma(i, li) = g.gamma;
                t.gated_sum.row(i) += g.gated.transpose();
            }
        }
        t.refined = t.gated_sum * params.fusion.weight.transpose();
        t.refined.rowwise() += params.fusion.bias.transpose();
    } else {
        t.refined = t.features;
    }

    const auto c = prototypes.rows();
    t.refined_norm.resize(m);
    t.scores.resize(m, c);
    t.probs.resize(m, c);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vector h = t.refined.row(i).transpose();
        t.refined_norm[i] = h.norm();
        t.scores.row(i) = patch_scores(h, prototypes).transpose();
        t.probs.row(i) = patch_probs(t.scores.row(i).transpose(), params.temp).transpose();
    }

    t.positions.resize(m, d);
    for (Eigen::Index i = 0; i < m; ++i) {
        t.positions.row(i) = positional_embedding(t.coords[static_cast<std::size_t>(i)], params.agg).transpose();
    }
    t.alpha = patch_weights(t.refined, t.coords, params.agg);
    t.slide_probs = aggregate_slide(t.alpha, t.probs);
    return t;
}

int argmax(const Vector& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return static_cast<int>(best);
}

/// Loss of one slide; when `grad` is set, adds weight * dLoss/dparams to it.
double slide_objective(const SlideRecord& slide, const ModelParams& params, const Matrix& prototypes,
                       double lambda_slide, const ForwardOptions& options, ModelParams* grad, double weight) {
    if (!slide.label) {
        throw std::invalid_argument("slide '" + slide.slide_id + "' has no label");
    }
    const int y = *slide.label;
    if (y >= prototypes.rows()) {
        throw std::out_of_range("slide '" + slide.slide_id + "' label " + std::to_string(y) +
                                " outside the prototype set");
    }
    const SlideTrace t = trace_forward(slide, params, prototypes, options);
    const auto m = t.features.rows();
    const int d = params.dim();
    const double inv_m = 1.0 / static_cast<double>(m);

    double loss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        loss += patch_loss(t.probs.row(i).transpose(), y) * inv_m;
    }
    loss += lambda_slide * slide_loss(t.slide_probs, y);
    if (grad == nullptr) {
        return loss;
    }

    const double tau = params.temp.tau();
    // dL/dP_y for the slide term; other components of P carry no loss.
    const double grad_slide_py = -lambda_slide / t.slide_probs[y];

    // Aggregation weights: dL/dalpha_i = dL/dP . p_i.
    Vector grad_alpha(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        grad_alpha[i] = grad_slide_py * t.probs(i, y);
    }
    const Vector grad_logit = (t.alpha.array() * (grad_alpha.array() - t.alpha.dot(grad_alpha))).matrix();

    Matrix grad_refined = Matrix::Zero(m, d);
    ModelParams& g = *grad;
    const auto w_feat = params.agg.w.head(d);
    const auto w_pos = params.agg.w.tail(d);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double gl = weight * grad_logit[i];
        g.agg.w.head(d) += gl * t.refined.row(i).transpose();
        g.agg.w.tail(d) += gl * t.positions.row(i).transpose();
        grad_refined.row(i) += grad_logit[i] * w_feat.transpose();
        if (params.agg.table) {
            g.agg.table->row(table_row(t.coords[static_cast<std::size_t>(i)], params.agg)) +=
                gl * w_pos.transpose();
        }
    }

    // Patch distributions: slide term through alpha_i, patch term directly.
    double grad_log_tau = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        Vector grad_p = Vector::Zero(prototypes.rows());
        grad_p[y] = t.alpha[i] * grad_slide_py - inv_m / t.probs(i, y);
        const Vector p = t.probs.row(i).transpose();
        const Vector grad_z = (p.array() * (grad_p.array() - p.dot(grad_p))).matrix();
        const Vector z = t.scores.row(i).transpose() / tau;
        grad_log_tau -= grad_z.dot(z);
        const Vector grad_s = grad_z / tau;

        // Cosine against unit prototypes: ds_c/dH = T_c / n - s_c H / n^2.
        const double n = t.refined_norm[i];
        const Vector h = t.refined.row(i).transpose();
        const Vector grad_h = prototypes.transpose() * grad_s / n - grad_s.dot(t.scores.row(i).transpose()) * h / (n * n);
        grad_refined.row(i) += grad_h.transpose();
    }
    g.temp.log_tau += weight * grad_log_tau;

    if (!options.lwa_gff) {
        return loss;
    }

    // Fusion: H = W_f u + b_f.
    g.fusion.weight.noalias() += weight * grad_refined.transpose() * t.gated_sum;
    g.fusion.bias += weight * grad_refined.colwise().sum().transpose();
    const Matrix grad_sum = grad_refined * params.fusion.weight;  // M x d

    // Gates: gated = gamma * h with gamma = sigmoid(w_g . h + b_g).
    const auto heads = static_cast<std::size_t>(params.heads());
    std::vector<Matrix> grad_head_out(heads, Matrix(m, d));
    for (std::size_t l = 0; l < heads; ++l) {
        const auto li = static_cast<Eigen::Index>(l);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double gamma = t.gamma(i, li);
            const double inner = grad_sum.row(i).dot(t.head_out[l].row(i));
            const double grad_pre = inner * gamma * (1.0 - gamma);
            grad_head_out[l].row(i) = gamma * grad_sum.row(i) + grad_pre * params.gates.weights.row(li);
            g.gates.weights.row(li) += weight * grad_pre * t.head_out[l].row(i);
            g.gates.biases[li] += weight * grad_pre;
        }
    }

    for (std::size_t w = 0; w < t.partition.windows.size(); ++w) {
        const auto& win = t.partition.windows[w];
        const Matrix local = gather_rows(t.features, win.members);
        for (std::size_t l = 0; l < heads; ++l) {
            const Matrix grad_out = gather_rows(grad_head_out[l], win.members) * weight;
            attend_window_backward(local, win.offsets, t.attention[w][l], grad_out, g.lwa.heads[l]);
        }
    }
    return loss;
}

Matrix checked_prototypes(const std::vector<SlideRecord>& slides, const ModelParams& params, const PrototypeSet& set) {
    if (slides.empty()) {
        throw std::invalid_argument("loss over an empty batch");
    }
    validate(params);
    for (const auto& s : slides) {
        check_inputs(s, params, set);
    }
    return set.embedding_matrix();
}

}  // namespace

SlideForward forward_slide(const SlideRecord& slide, const ModelParams& params, const PrototypeSet& set,
                           const ForwardOptions& options) {
    validate(params);
    check_inputs(slide, params, set);
    SlideTrace t = trace_forward(slide, params, set.embedding_matrix(), options);
    SlideForward out;
    out.refined = std::move(t.refined);
    out.scores = std::move(t.scores);
    out.patch_probs = std::move(t.probs);
    out.slide.alpha = std::move(t.alpha);
    out.slide.probs = std::move(t.slide_probs);
    out.slide.predicted = argmax(out.slide.probs);
    return out;
}

double total_loss(const std::vector<SlideRecord>& slides, const ModelParams& params, const PrototypeSet& set,
                  double lambda_slide, const ForwardOptions& options) {
    const Matrix prototypes = checked_prototypes(slides, params, set);
    double loss = 0.0;
    for (const auto& s : slides) {
        loss += slide_objective(s, params, prototypes, lambda_slide, options, nullptr, 0.0);
    }
    return loss / static_cast<double>(slides.size());
}

double loss_and_grad(const std::vector<SlideRecord>& slides, const ModelParams& params, const PrototypeSet& set,
                     double lambda_slide, const ForwardOptions& options, GradientBundle& grad) {
    const Matrix prototypes = checked_prototypes(slides, params, set);
    grad.values = zeros_like(params);
    const double weight = 1.0 / static_cast<double>(slides.size());
    double loss = 0.0;
    // Fixed slide order keeps the accumulation bit-reproducible.
    for (const auto& s : slides) {
        loss += slide_objective(s, params, prototypes, lambda_slide, options, &grad.values, weight);
    }
    return loss / static_cast<double>(slides.size());
}

GradientBundle grad_total_loss(const std::vector<SlideRecord>& slides, const ModelParams& params,
                               const PrototypeSet& set, double lambda_slide, const ForwardOptions& options) {
    GradientBundle grad;
    loss_and_grad(slides, params, set, lambda_slide, options, grad);
    return grad;
}

}  // namespace fgpan
