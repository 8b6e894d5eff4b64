#include "fgpan/crossmodal.hpp"

#include "fgpan/prototypes.hpp"

namespace fgpan {

TemperatureParam TemperatureParam::from_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw std::invalid_argument("temperature must be positive and finite");
    }
    return TemperatureParam{std::log(tau)};
}

Vector patch_scores(const Vector& h, const Matrix& prototypes) {
    if (h.size() != prototypes.cols()) {
        throw DimensionError("patch feature width " + std::to_string(h.size()) + " != prototype dimension " +
                             std::to_string(prototypes.cols()));
    }
    const double n = h.norm();
    if (n == 0.0) {
        throw std::invalid_argument("patch_scores: zero-norm patch feature");
    }
    return prototypes * h / n;
}

Vector patch_scores(const Vector& h, const PrototypeSet& set) {
    if (!is_normalized(set)) {
        throw std::invalid_argument("patch_scores expects normalized prototypes");
    }
    return patch_scores(h, set.embedding_matrix());
}

Vector patch_probs(const Vector& scores, const TemperatureParam& temp) {
    return softmax(scores / temp.tau());
}

double patch_loss(const Vector& probs, int label) {
    if (label < 0 || label >= probs.size()) {
        throw std::out_of_range("patch_loss: label " + std::to_string(label) + " outside 0.." +
                                std::to_string(probs.size() - 1));
    }
    return -std::log(probs[label]);
}

}  // namespace fgpan
