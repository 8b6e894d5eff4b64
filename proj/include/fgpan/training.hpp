#pragma once

#include "fgpan/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace fgpan {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    int batch_size = 4;
    int iterations = 300;
    double lambda_slide = 1.0;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

void validate(const TrainConfig& cfg);

/// Long schedule: lr 1e-5, wd 1e-4, batch 4, 20000 iterations.
TrainConfig paper_profile();
/// Same optimizer with lr 1e-3 and 300 iterations, sized for a workstation.
TrainConfig desk_profile();
/// "paper" or "desk".
TrainConfig profile_by_name(std::string_view name);

/// First and second moments for every scalar, in leaf order.
struct AdamWState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    long step = 0;
};

AdamWState make_adamw_state(const ModelParams& params);

/// One decoupled-weight-decay update. Decay skips log_tau, b_g and b_f.
void adamw_step(ModelParams& params, const GradientBundle& grads, AdamWState& state, const TrainConfig& cfg);

/// Central-difference check of a flat parameter vector: max over checked
/// scalars of |a - n| / max(1e-8, |a| + |n|). `theta` is restored on return.
double finite_diff_check(const std::function<double(std::span<const double>)>& loss, std::span<double> theta,
                         std::span<const double> analytic, double step, std::size_t max_scalars = 5000);

/// The same check applied to total_loss over every model parameter.
double finite_diff_check(const std::vector<SlideRecord>& slides, const ModelParams& params, const PrototypeSet& set,
                         double lambda_slide, double step, const ForwardOptions& options = {},
                         std::size_t max_scalars = 5000);

struct TrainResult {
    ModelParams params;
    std::vector<double> losses;  // batch loss before each update
};

/// AdamW over seeded-shuffled batches; the order is reshuffled every epoch.
TrainResult train(const std::vector<SlideRecord>& dataset, const TrainConfig& cfg, const PrototypeSet& set,
                  ModelParams initial, const ForwardOptions& options = {});

}  // namespace fgpan

namespace fgpan {

/// Small random problem for gradient verification: labeled slides with
/// Gaussian features on distinct grid cells, normalized random prototypes and
/// freshly initialized parameters. A positive `jitter_sigma` adds Gaussian noise
/// to the zero-initialized leaves (gates, biases, fusion, w) so that terms which
/// vanish at initialization are exercised too.
struct GradCheckInstance {
    std::vector<SlideRecord> slides;
    PrototypeSet prototypes;
    ModelParams params;
};

GradCheckInstance make_gradcheck_instance(const ModelShape& shape, int classes, int patches, int slide_count,
                                          std::uint64_t seed, double jitter_sigma = 0.0);

}  // namespace fgpan
