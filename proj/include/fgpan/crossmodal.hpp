#pragma once

#include "fgpan/data_model.hpp"

#include <cmath>

namespace fgpan {

/// Temperature stored in log space so tau = exp(log_tau) stays positive.
struct TemperatureParam {
    double log_tau = std::log(0.07);

    double tau() const noexcept { return std::exp(log_tau); }
    static TemperatureParam from_tau(double tau);
};

/// Cosine similarity of H against each prototype row of a normalized C x d matrix.
Vector patch_scores(const Vector& h, const Matrix& prototypes);
Vector patch_scores(const Vector& h, const PrototypeSet& set);

/// softmax(s / tau)
Vector patch_probs(const Vector& scores, const TemperatureParam& temp);

/// -ln p_y
double patch_loss(const Vector& probs, int label);

}  // namespace fgpan
