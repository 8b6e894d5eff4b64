#include "fgpan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fgpan {

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw std::invalid_argument("learning rate must be finite and non-negative");
    }
    if (!(cfg.weight_decay >= 0.0)) {
        throw std::invalid_argument("weight decay must be non-negative");
    }
    if (cfg.batch_size < 1 || cfg.iterations < 0) {
        throw std::invalid_argument("batch size must be >= 1 and iterations >= 0");
    }
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw std::invalid_argument("AdamW betas must lie in [0, 1)");
    }
    if (!(cfg.epsilon > 0.0)) {
        throw std::invalid_argument("AdamW epsilon must be positive");
    }
    if (!(cfg.lambda_slide >= 0.0)) {
        throw std::invalid_argument("lambda_slide must be non-negative");
    }
}

TrainConfig paper_profile() {
    TrainConfig cfg;
    cfg.learning_rate = 1e-5;
    cfg.weight_decay = 1e-4;
    cfg.batch_size = 4;
    cfg.iterations = 20000;
    return cfg;
}

TrainConfig desk_profile() {
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.weight_decay = 1e-4;
    cfg.batch_size = 4;
    cfg.iterations = 300;
    return cfg;
}

TrainConfig profile_by_name(std::string_view name) {
    if (name == "paper") return paper_profile();
    if (name == "desk") return desk_profile();
    throw std::invalid_argument("unknown profile '" + std::string(name) + "' (valid: paper, desk)");
}

AdamWState make_adamw_state(const ModelParams& params) {
    const std::size_t n = scalar_count(params);
    return AdamWState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
}

void adamw_step(ModelParams& params, const GradientBundle& grads, AdamWState& state, const TrainConfig& cfg) {
    const std::vector<double> g = flatten(grads.values);
    if (g.size() != scalar_count(params) || state.first_moment.size() != g.size() ||
        state.second_moment.size() != g.size()) {
        throw DimensionError("adamw_step: parameters, gradients and state differ in shape");
    }
    ++state.step;
    const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    std::size_t k = 0;
    for_each_leaf(params, [&](const std::string&, std::span<double> theta, bool decays) {
        for (double& t : theta) {
            double& m = state.first_moment[k];
            double& v = state.second_moment[k];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[k];
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[k] * g[k];
            const double m_hat = m / correction1;
            const double v_hat = v / correction2;
            const double decay = decays ? cfg.learning_rate * cfg.weight_decay * t : 0.0;
            t = t - cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.epsilon)) - decay;
            ++k;
        }
    });
}

double finite_diff_check(const std::function<double(std::span<const double>)>& loss, std::span<double> theta,
                         std::span<const double> analytic, double step, std::size_t max_scalars) {
    if (!(step > 0.0)) {
        throw std::invalid_argument("finite_diff_check: step must be positive");
    }
    if (analytic.size() != theta.size()) {
        throw DimensionError("finite_diff_check: gradient and parameter lengths differ");
    }
    if (max_scalars == 0) {
        throw std::invalid_argument("finite_diff_check: max_scalars must be positive");
    }
    // Evenly strided deterministic sample when there are too many scalars.
    const std::size_t n = theta.size();
    const std::size_t stride = n <= max_scalars ? 1 : (n + max_scalars - 1) / max_scalars;

    double worst = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
        const double original = theta[i];
        theta[i] = original + step;
        const double up = loss(theta);
        theta[i] = original - step;
        const double down = loss(theta);
        theta[i] = original;
        const double numeric = (up - down) / (2.0 * step);
        const double err = std::abs(analytic[i] - numeric) /
                           std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

double finite_diff_check(const std::vector<SlideRecord>& slides, const ModelParams& params, const PrototypeSet& set,
                         double lambda_slide, double step, const ForwardOptions& options, std::size_t max_scalars) {
    const std::vector<double> analytic = flatten(grad_total_loss(slides, params, set, lambda_slide, options).values);
    std::vector<double> theta = flatten(params);
    ModelParams probe = params;
    auto loss = [&](std::span<const double> flat) {
        unflatten(flat, probe);
        return total_loss(slides, probe, set, lambda_slide, options);
    };
    return finite_diff_check(loss, theta, analytic, step, max_scalars);
}

TrainResult train(const std::vector<SlideRecord>& dataset, const TrainConfig& cfg, const PrototypeSet& set,
                  ModelParams initial, const ForwardOptions& options) {
    validate(cfg);
    if (dataset.empty()) {
        throw std::invalid_argument("train: empty dataset");
    }
    for (const auto& s : dataset) {
        if (!s.label) {
            throw std::invalid_argument("train: slide '" + s.slide_id + "' has no label");
        }
        if (*s.label >= set.num_classes()) {
            throw std::out_of_range("train: slide '" + s.slide_id + "' label " + std::to_string(*s.label) +
                                    " is outside the prototype set");
        }
    }

    TrainResult result{std::move(initial), {}};
    result.losses.reserve(static_cast<std::size_t>(cfg.iterations));
    AdamWState state = make_adamw_state(result.params);
    std::mt19937_64 rng(cfg.seed);

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    const auto batch_size = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), dataset.size());

    std::vector<SlideRecord> batch;
    GradientBundle grad;
    for (int it = 0; it < cfg.iterations; ++it) {
        batch.clear();
        while (batch.size() < batch_size) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(dataset[order[cursor++]]);
        }
        result.losses.push_back(loss_and_grad(batch, result.params, set, cfg.lambda_slide, options, grad));
        adamw_step(result.params, grad, state, cfg);
    }
    return result;
}

}  // namespace fgpan

namespace fgpan {

GradCheckInstance make_gradcheck_instance(const ModelShape& shape, int classes, int patches, int slide_count,
                                          std::uint64_t seed, double jitter_sigma) {
    if (classes < 1 || patches < 1 || slide_count < 1) {
        throw std::invalid_argument("gradcheck instance: counts must be positive");
    }
    if (static_cast<long>(patches) > static_cast<long>(shape.grid_rows) * shape.grid_cols) {
        throw std::invalid_argument("gradcheck instance: more patches than grid cells");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = shape.dim;

    GradCheckInstance inst;
    inst.prototypes.dim = d;
    for (int c = 0; c < classes; ++c) {
        ClassPrototype p;
        p.class_id = c;
        p.name = "class_" + std::to_string(c);
        p.description = p.name;
        p.embedding.resize(d);
        for (int j = 0; j < d; ++j) p.embedding[j] = normal(rng);
        p.embedding.normalize();
        inst.prototypes.prototypes.push_back(std::move(p));
    }

    std::vector<int> cells(static_cast<std::size_t>(shape.grid_rows) * shape.grid_cols);
    std::iota(cells.begin(), cells.end(), 0);
    std::uniform_int_distribution<int> label_dist(0, classes - 1);
    for (int s = 0; s < slide_count; ++s) {
        SlideRecord slide;
        slide.slide_id = "gc_" + std::to_string(s);
        slide.label = label_dist(rng);
        slide.dim = d;
        slide.grid_rows = shape.grid_rows;
        slide.grid_cols = shape.grid_cols;
        std::shuffle(cells.begin(), cells.end(), rng);
        std::vector<int> chosen(cells.begin(), cells.begin() + patches);
        std::sort(chosen.begin(), chosen.end());
        for (int cell : chosen) {
            PatchEmbedding p;
            p.coord = {cell / shape.grid_cols, cell % shape.grid_cols};
            p.vector.resize(d);
            for (int j = 0; j < d; ++j) p.vector[j] = normal(rng);
            slide.patches.push_back(std::move(p));
        }
        inst.slides.push_back(std::move(slide));
    }

    inst.params = init_params(shape, rng());
    if (jitter_sigma <= 0.0) {
        return inst;
    }
    std::normal_distribution<double> jitter(0.0, jitter_sigma);
    for_each_leaf(inst.params, [&](const std::string& name, std::span<double> values, bool) {
        if (name.find("w_q") != std::string::npos || name.find("w_k") != std::string::npos ||
            name.find("w_v") != std::string::npos || name == "temperature.log_tau" || name == "agg.table") {
            return;
        }
        for (double& v : values) v += jitter(rng);
    });
    return inst;
}

}  // namespace fgpan
