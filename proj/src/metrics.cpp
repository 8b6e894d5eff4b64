#include "fgpan/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace fgpan {

int num_classes(const std::vector<EvalRecord>& records) {
    if (records.empty()) {
        throw std::invalid_argument("metrics need at least one record");
    }
    int c = 0;
    for (const auto& r : records) {
        if (r.true_label < 0 || r.predicted_label < 0) {
            throw std::invalid_argument("negative class label in '" + r.slide_id + "'");
        }
        c = std::max({c, r.true_label + 1, r.predicted_label + 1, static_cast<int>(r.probs.size())});
    }
    return c;
}

Eigen::MatrixXi confusion_matrix(const std::vector<EvalRecord>& records) {
    const int c = num_classes(records);
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(c, c);
    for (const auto& r : records) {
        ++counts(r.true_label, r.predicted_label);
    }
    return counts;
}

double balanced_accuracy(const std::vector<EvalRecord>& records) {
    const Eigen::MatrixXi counts = confusion_matrix(records);
    double total = 0.0;
    for (Eigen::Index c = 0; c < counts.rows(); ++c) {
        const int support = counts.row(c).sum();
        if (support == 0) {
            throw std::invalid_argument("balanced accuracy: class " + std::to_string(c) +
                                        " never occurs in the true labels");
        }
        total += static_cast<double>(counts(c, c)) / support;
    }
    return total / static_cast<double>(counts.rows());
}

F1Scores f1_scores(const std::vector<EvalRecord>& records) {
    const Eigen::MatrixXi counts = confusion_matrix(records);
    const auto c = counts.rows();
    F1Scores out;
    out.per_class.resize(static_cast<std::size_t>(c), 0.0);
    double weighted = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) {
        const double tp = counts(k, k);
        const double support = counts.row(k).sum();
        const double predicted = counts.col(k).sum();
        const double precision = predicted > 0 ? tp / predicted : 0.0;
        const double recall = support > 0 ? tp / support : 0.0;
        const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        out.per_class[static_cast<std::size_t>(k)] = f1;
        weighted += f1 * support;
    }
    out.macro = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) / static_cast<double>(c);
    out.weighted = weighted / static_cast<double>(records.size());
    return out;
}

double auc_mann_whitney(const std::vector<double>& positive, const std::vector<double>& negative) {
    if (positive.empty() || negative.empty()) {
        throw std::invalid_argument("AUC needs at least one positive and one negative");
    }
    struct Scored {
        double score;
        bool positive;
    };
    std::vector<Scored> all;
    all.reserve(positive.size() + negative.size());
    for (double s : positive) all.push_back({s, true});
    for (double s : negative) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

    // Sum of midranks (1-based) of the positives.
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].positive) rank_sum += midrank;
        }
        i = j;
    }
    const double np = static_cast<double>(positive.size());
    const double nn = static_cast<double>(negative.size());
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auroc_ovr(const std::vector<EvalRecord>& records) {
    const int c = num_classes(records);
    for (const auto& r : records) {
        if (r.probs.size() != c) {
            throw DimensionError("auroc_ovr: record '" + r.slide_id + "' has a probability vector of the wrong width");
        }
    }
    double total = 0.0;
    for (int k = 0; k < c; ++k) {
        std::vector<double> pos;
        std::vector<double> neg;
        for (const auto& r : records) {
            (r.true_label == k ? pos : neg).push_back(r.probs[k]);
        }
        if (pos.empty() || neg.empty()) {
            throw std::invalid_argument("auroc_ovr: class " + std::to_string(k) +
                                        " lacks positives or negatives");
        }
        total += auc_mann_whitney(pos, neg);
    }
    return total / c;
}

}  // namespace fgpan
