#pragma once

#include "fgpan/aggregation.hpp"
#include "fgpan/crossmodal.hpp"
#include "fgpan/data_model.hpp"
#include "fgpan/gated_fusion.hpp"
#include "fgpan/window_attention.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

namespace fgpan {

/// Every learnable tensor of the pipeline.
struct ModelParams {
    LwaParams lwa;
    GateParams gates;
    FusionParams fusion;
    TemperatureParam temp;
    AggregationParams agg;

    int dim() const noexcept { return lwa.dim; }
    int heads() const noexcept { return static_cast<int>(lwa.heads.size()); }
    int window_size() const noexcept { return lwa.window_size; }
};

void validate(const ModelParams& params);

struct ModelShape {
    int dim = 16;
    int window_size = 2;
    int heads = 2;
    int grid_rows = 16;
    int grid_cols = 16;
    PositionalMode pos_mode = PositionalMode::sinusoidal;
    bool identity_value_init = true;  // false: W_V drawn like W_Q, W_K
};

/// W_Q, W_K ~ N(0, 1/sqrt(d)); W_V = I (or random, see ModelShape); bias tables,
/// gates, b_f and w zero; W_f = I; tau = 0.07; learned positional table ~ N(0, 0.02).
ModelParams init_params(const ModelShape& shape, std::uint64_t seed, double initial_tau = 0.07);

/// Same-shaped tensors with every scalar set to zero.
ModelParams zeros_like(const ModelParams& params);

/// Gradient of a scalar loss, one tensor per parameter leaf.
struct GradientBundle {
    ModelParams values;
};

namespace detail {
template <typename M>
auto leaf_span(M& m) {
    using Scalar = std::remove_pointer_t<decltype(m.data())>;
    return std::span<Scalar>(m.data(), static_cast<std::size_t>(m.size()));
}
}  // namespace detail

/// Visits every parameter leaf in the stable flat order used for checkpoints,
/// gradient indexing and the optimizer. `fn(name, values, decays)`; `decays` is
/// false for log_tau and the scalar biases b_g, b_f.
template <typename Params, typename Fn>
    requires std::is_same_v<std::remove_const_t<Params>, ModelParams>
void for_each_leaf(Params& params, Fn&& fn) {
    for (std::size_t l = 0; l < params.lwa.heads.size(); ++l) {
        auto& h = params.lwa.heads[l];
        const std::string prefix = "lwa.head" + std::to_string(l) + ".";
        fn(prefix + "w_q", detail::leaf_span(h.w_q), true);
        fn(prefix + "w_k", detail::leaf_span(h.w_k), true);
        fn(prefix + "w_v", detail::leaf_span(h.w_v), true);
        fn(prefix + "bias_table", detail::leaf_span(h.bias_table), true);
    }
    fn(std::string("gate.weights"), detail::leaf_span(params.gates.weights), true);
    fn(std::string("gate.biases"), detail::leaf_span(params.gates.biases), false);
    fn(std::string("fusion.weight"), detail::leaf_span(params.fusion.weight), true);
    fn(std::string("fusion.bias"), detail::leaf_span(params.fusion.bias), false);
    using Scalar = std::conditional_t<std::is_const_v<Params>, const double, double>;
    fn(std::string("temperature.log_tau"), std::span<Scalar>(&params.temp.log_tau, 1), false);
    fn(std::string("agg.w"), detail::leaf_span(params.agg.w), true);
    if (params.agg.table) {
        fn(std::string("agg.table"), detail::leaf_span(*params.agg.table), true);
    }
}

std::size_t scalar_count(const ModelParams& params);

/// Flat copy of every scalar in leaf order, and the inverse.
std::vector<double> flatten(const ModelParams& params);
void unflatten(std::span<const double> flat, ModelParams& params);

/// Ablation switches.
struct ForwardOptions {
    bool lwa_gff = true;  // false: H_i = f_i
};

struct SlideForward {
    Matrix refined;      // M x d, the H_i
    Matrix scores;       // M x C cosine similarities
    Matrix patch_probs;  // M x C
    SlidePrediction slide;
};

/// partition -> LWA -> gate/fuse -> cosine scores -> softmax(s/tau) ->
/// coordinate-aware weights -> weighted sum of patch distributions.
SlideForward forward_slide(const SlideRecord& slide, const ModelParams& params, const PrototypeSet& set,
                           const ForwardOptions& options = {});

/// Mean over slides of [mean_i L_patch,i + lambda * L_slide]. Patch labels are
/// the slide label.
double total_loss(const std::vector<SlideRecord>& slides, const ModelParams& params, const PrototypeSet& set,
                  double lambda_slide, const ForwardOptions& options = {});

/// Exact gradient of total_loss with respect to every parameter leaf.
GradientBundle grad_total_loss(const std::vector<SlideRecord>& slides, const ModelParams& params,
                               const PrototypeSet& set, double lambda_slide, const ForwardOptions& options = {});

/// Loss and gradient in one pass.
double loss_and_grad(const std::vector<SlideRecord>& slides, const ModelParams& params, const PrototypeSet& set,
                     double lambda_slide, const ForwardOptions& options, GradientBundle& grad);

}  // namespace fgpan
