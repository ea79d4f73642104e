#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "cascade/net.hpp"

namespace cascade {

// One instance's rollout outputs in analysis-friendly form: [T][C] rows.
struct InstanceTrace {
    std::vector<std::vector<double>> probs;
    std::vector<std::vector<double>> logits;
    std::size_t cycles = 0;

    std::size_t steps() const { return probs.size(); }
    std::size_t classes() const { return probs.empty() ? 0 : probs[0].size(); }
};

template <typename T>
std::vector<InstanceTrace> instance_traces(const RolloutTrace<T>& trace) {
    const std::size_t steps = trace.probs.size();
    if (steps == 0) return {};
    const std::size_t N = trace.probs[0].shape[0], C = trace.probs[0].shape[1];
    std::vector<InstanceTrace> out(N);
    for (auto& tr : out) {
        tr.probs.assign(steps, std::vector<double>(C));
        tr.logits.assign(steps, std::vector<double>(C));
        tr.cycles = trace.cycles;
    }
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t c = 0; c < C; ++c) {
                out[n].probs[t][c] = double(trace.probs[t].data[n * C + c]);
                out[n].logits[t][c] = double(trace.logits[t].data[n * C + c]);
            }
    return out;
}

struct StoppingPolicy {
    enum class Kind { ConfidenceThreshold, Deadline };
    Kind kind = Kind::ConfidenceThreshold;
    double theta = 0.5;        // in [0,1]
    std::size_t deadline = 1;  // fixed stop step for Deadline

    static StoppingPolicy confidence(double theta) {
        if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("StoppingPolicy: theta in [0,1]");
        return {Kind::ConfidenceThreshold, theta, 1};
    }
    static StoppingPolicy at_deadline(std::size_t step) { return {Kind::Deadline, 0.0, step}; }
};

// First step whose top-class confidence exceeds theta; the horizon if never
// (forced answer). Deadline policies return their fixed step.
std::size_t stop_time(const InstanceTrace& trace, const StoppingPolicy& policy);

std::size_t argmax_class(const std::vector<double>& row);

struct CurvePoint {
    double theta;
    double mean_stop_cycles;
    double mean_accuracy;
};

// Sweep of theta against mean stopping time and accuracy of the argmax at the
// stop step. One block-update cycle per step keeps serial and cascaded runs
// on a shared axis.
std::vector<CurvePoint> speed_accuracy_curve(const std::vector<InstanceTrace>& traces,
                                             const std::vector<std::size_t>& labels,
                                             const std::vector<double>& theta_grid);

// Earliest step from which some single class stays above theta for the rest
// of the trace; nullopt when no class does.
std::optional<std::size_t> selection_latency(const InstanceTrace& trace, double theta);

// Among instances misclassified at step t (1-based), the fraction whose
// predicted fine class maps to the correct coarse class. nullopt if there are
// no errors at that step.
std::optional<double> taxonomic_compliance(const std::vector<InstanceTrace>& traces,
                                           const std::vector<std::size_t>& fine_labels,
                                           const std::vector<std::size_t>& coarse_map, std::size_t t);

// Cosine similarity of an embedding and the true class's head weight row.
double centrality(const std::vector<double>& embedding, const std::vector<double>& class_weight_row);

// Final confidence minus the mean confidence from noise onset (0-based index)
// to the end of the episode; how much integrated performance the perturbation
// cost.
double drop_in_integrated_performance(const std::vector<double>& confidence, std::size_t onset);

} // namespace cascade
