#pragma once

#include "fgpan/linalg.hpp"

#include <string>
#include <vector>

namespace fgpan {

struct EvalRecord {
    std::string slide_id;
    int true_label = 0;
    int predicted_label = 0;
    Vector probs;
};

/// Class count implied by the records: the probability width, or one past the
/// largest label when no probabilities are attached.
int num_classes(const std::vector<EvalRecord>& records);

/// counts(t, p) = number of records with true class t predicted as p.
Eigen::MatrixXi confusion_matrix(const std::vector<EvalRecord>& records);

/// Mean per-class recall. Every class must occur among the true labels.
double balanced_accuracy(const std::vector<EvalRecord>& records);

struct F1Scores {
    double macro = 0.0;
    double weighted = 0.0;
    std::vector<double> per_class;
};

/// Per-class F1 is 0 when precision + recall is 0.
F1Scores f1_scores(const std::vector<EvalRecord>& records);

/// Binary AUC of scores by the Mann-Whitney statistic with midranks for ties.
double auc_mann_whitney(const std::vector<double>& positive, const std::vector<double>& negative);

/// Unweighted mean over classes of one-vs-rest AUC on P^(c).
double auroc_ovr(const std::vector<EvalRecord>& records);

}  // namespace fgpan
