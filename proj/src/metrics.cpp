#include "cascade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cascade {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (double(i) + double(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman_rho: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("spearman_rho: need at least 2 points");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = double(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("spearman_rho: constant input");
    return sxy / std::sqrt(sxx * syy);
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auroc: length mismatch");
    std::size_t npos = 0, nneg = 0;
    for (int l : labels) (l ? npos : nneg) += 1;
    if (npos == 0 || nneg == 0) throw std::invalid_argument("auroc: need both classes");
    const auto ranks = average_ranks(scores);
    double rank_sum = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i]) rank_sum += ranks[i];
    // Mann-Whitney U statistic normalized by the pair count
    const double u = rank_sum - double(npos) * (double(npos) + 1.0) / 2.0;
    return u / (double(npos) * double(nneg));
}

double fpr_at_tpr(const std::vector<double>& scores, const std::vector<int>& labels, double tpr_target) {
    if (scores.size() != labels.size()) throw std::invalid_argument("fpr_at_tpr: length mismatch");
    if (tpr_target <= 0.0 || tpr_target > 1.0) throw std::invalid_argument("fpr_at_tpr: target in (0,1]");
    std::size_t npos = 0, nneg = 0;
    for (int l : labels) (l ? npos : nneg) += 1;
    if (npos == 0 || nneg == 0) throw std::invalid_argument("fpr_at_tpr: need both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // sweep thresholds over distinct scores, descending; classify score >= thr
    // as positive and take the first (largest) threshold that meets the target
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) (labels[order[k]] ? tp : fp) += 1;
        if (double(tp) / double(npos) >= tpr_target) return double(fp) / double(nneg);
        i = j + 1;
    }
    return 1.0; // every instance classified positive
}

} // namespace cascade
