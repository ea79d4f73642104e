#include "cascade/harness.hpp"

#include <algorithm>
#include <cmath>

namespace cascade {

std::size_t argmax_class(const std::vector<double>& row) {
    return std::size_t(std::max_element(row.begin(), row.end()) - row.begin());
}

std::size_t stop_time(const InstanceTrace& trace, const StoppingPolicy& policy) {
    const std::size_t T = trace.steps();
    if (T == 0) throw std::invalid_argument("stop_time: empty trace");
    if (policy.kind == StoppingPolicy::Kind::Deadline) return std::min(std::max<std::size_t>(policy.deadline, 1), T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto& row = trace.probs[t];
        if (row[argmax_class(row)] > policy.theta) return t + 1;
    }
    return T;
}

std::vector<CurvePoint> speed_accuracy_curve(const std::vector<InstanceTrace>& traces,
                                             const std::vector<std::size_t>& labels,
                                             const std::vector<double>& theta_grid) {
    if (traces.size() != labels.size()) throw std::invalid_argument("speed_accuracy_curve: size mismatch");
    if (traces.empty()) throw std::invalid_argument("speed_accuracy_curve: no traces");
    std::vector<CurvePoint> out;
    out.reserve(theta_grid.size());
    for (double theta : theta_grid) {
        const auto policy = StoppingPolicy::confidence(theta);
        double mean_stop = 0, mean_acc = 0;
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const std::size_t st = stop_time(traces[i], policy);
            mean_stop += double(st);
            mean_acc += argmax_class(traces[i].probs[st - 1]) == labels[i] ? 1.0 : 0.0;
        }
        out.push_back({theta, mean_stop / double(traces.size()), mean_acc / double(traces.size())});
    }
    return out;
}

std::optional<std::size_t> selection_latency(const InstanceTrace& trace, double theta) {
    const std::size_t T = trace.steps(), C = trace.classes();
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < C; ++c) {
        if (trace.probs[T - 1][c] <= theta) continue;
        // walk back through the suffix where class c stays above theta
        std::size_t t = T;
        while (t > 1 && trace.probs[t - 2][c] > theta) --t;
        if (!best || t < *best) best = t;
    }
    return best;
}

std::optional<double> taxonomic_compliance(const std::vector<InstanceTrace>& traces,
                                           const std::vector<std::size_t>& fine_labels,
                                           const std::vector<std::size_t>& coarse_map, std::size_t t) {
    if (traces.size() != fine_labels.size()) throw std::invalid_argument("taxonomic_compliance: size mismatch");
    if (coarse_map.empty()) throw std::invalid_argument("taxonomic_compliance: empty coarse map");
    std::size_t errors = 0, compliant = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        if (t < 1 || t > traces[i].steps()) throw std::invalid_argument("taxonomic_compliance: step out of range");
        const std::size_t pred = argmax_class(traces[i].probs[t - 1]);
        if (pred == fine_labels[i]) continue;
        ++errors;
        if (coarse_map.at(pred) == coarse_map.at(fine_labels[i])) ++compliant;
    }
    if (errors == 0) return std::nullopt;
    return double(compliant) / double(errors);
}

double centrality(const std::vector<double>& embedding, const std::vector<double>& class_weight_row) {
    if (embedding.size() != class_weight_row.size() || embedding.empty())
        throw std::invalid_argument("centrality: vector size mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < embedding.size(); ++i) {
        dot += embedding[i] * class_weight_row[i];
        na += embedding[i] * embedding[i];
        nb += class_weight_row[i] * class_weight_row[i];
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("centrality: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double drop_in_integrated_performance(const std::vector<double>& confidence, std::size_t onset) {
    if (confidence.empty()) throw std::invalid_argument("dip: empty trace");
    if (onset >= confidence.size()) throw std::invalid_argument("dip: onset past the end");
    double mean = 0;
    for (std::size_t t = onset; t < confidence.size(); ++t) mean += confidence[t];
    mean /= double(confidence.size() - onset);
    return confidence.back() - mean;
}

} // namespace cascade
