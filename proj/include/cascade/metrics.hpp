#pragma once

#include <vector>

namespace cascade {

// Spearman rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Area under the ROC curve; labels are 1 (positive) / 0. Equals
// P(score_pos > score_neg) + 0.5 * P(tie).
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// False positive rate at the highest threshold whose TPR reaches the target.
double fpr_at_tpr(const std::vector<double>& scores, const std::vector<int>& labels,
                  double tpr_target = 0.95);

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(const std::vector<double>& v);

} // namespace cascade
