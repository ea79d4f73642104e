#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascade/harness.hpp"
#include "cascade/optim.hpp"
#include "cascade/rng.hpp"
#include "cascade/tape.hpp"

namespace cascade {

enum class FeatureKind { MSP, Entropy, Softmax, Logits };
enum class FeatureScope { FinalStep, AllSteps };

FeatureKind feature_kind_from_name(const std::string& name);
FeatureScope feature_scope_from_name(const std::string& name);
const char* feature_kind_name(FeatureKind k);
const char* feature_scope_name(FeatureScope s);

// Flattened view of a rollout trace for the meta-cognitive classifier:
// per-step width is 1 for MSP/Entropy and C for Softmax/Logits; scope selects
// the final step or all of them.
struct TraceFeatures {
    FeatureKind kind = FeatureKind::MSP;
    FeatureScope scope = FeatureScope::FinalStep;
    std::size_t steps = 0;
    std::size_t per_step = 0;
    std::vector<double> vec;
};

TraceFeatures build_trace_features(const InstanceTrace& trace, FeatureKind kind, FeatureScope scope);

// One hidden layer of 256 ReLU units and a sigmoid output; dropout keep 0.5
// during training.
struct MetaCogModel {
    Tensor<float> w1, b1, w2, b2;
    double threshold = 0.5; // binary-report cut; ROC metrics stay threshold-free

    std::size_t input_dim() const { return w1.shape.empty() ? 0 : w1.shape[0]; }
};

struct MetaCogConfig {
    std::size_t hidden = 256;
    std::size_t epochs = 300;
    std::size_t batch_size = 256;
    double lr = 0.001;
    double weight_decay = 0.0005;
    double dropout_keep = 0.5;
    std::uint64_t seed = 42;
};

// Binary cross-entropy training; label 1 marks in-distribution.
MetaCogModel train_metacog(const std::vector<TraceFeatures>& in_dist,
                           const std::vector<TraceFeatures>& out_dist, const MetaCogConfig& cfg);

// In-distribution probability per feature vector.
std::vector<double> metacog_scores(const MetaCogModel& model, const std::vector<TraceFeatures>& features);

} // namespace cascade
