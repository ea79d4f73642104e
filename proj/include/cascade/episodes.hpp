#pragma once

#include <vector>

#include "cascade/augment.hpp"
#include "cascade/data.hpp"
#include "cascade/harness.hpp"
#include "cascade/net.hpp"
#include "cascade/noise.hpp"
#include "cascade/threading.hpp"

namespace cascade {

template <typename T>
Tensor<T> image_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                      const PixelStats& stats) {
    Tensor<T> out({indices.size(), ds.input_dim()});
    for (std::size_t n = 0; n < indices.size(); ++n) {
        Image img = normalize_only(ds.images[indices[n]], stats);
        for (std::size_t j = 0; j < img.pix.size(); ++j) out.data[n * img.pix.size() + j] = T(img.pix[j]);
    }
    return out;
}

template <typename T>
Tensor<T> single_input(const Image& img) {
    Tensor<T> out({1, img.pix.size()});
    for (std::size_t j = 0; j < img.pix.size(); ++j) out.data[j] = T(img.pix[j]);
    return out;
}

// Transient-noise episode: the clean input for `clean_steps`, a fresh noise
// sample per step for `duration` steps, then the clean input again until the
// model can settle. Returns the per-step true-class confidence.
template <typename T>
std::vector<double> transient_confidences(Network<T>& net, const Image& img, std::size_t label,
                                          const PixelStats& stats, const NoiseSpec& noise,
                                          const TemporalKernel& kernel, std::size_t duration, Rng& rng,
                                          std::size_t clean_steps = 10) {
    const Image clean = normalize_only(img, stats);
    std::vector<Tensor<T>> frames;
    const std::size_t horizon = 2 * clean_steps + duration;
    frames.reserve(horizon);
    for (std::size_t t = 0; t < clean_steps; ++t) frames.push_back(single_input<T>(clean));
    for (std::size_t t = 0; t < duration; ++t)
        frames.push_back(single_input<T>(normalize_only(apply_noise(img, noise, rng), stats)));
    for (std::size_t t = 0; t < clean_steps; ++t) frames.push_back(single_input<T>(clean));

    auto trace = run_cascaded(net, frames, horizon, kernel);
    std::vector<double> conf(horizon);
    const std::size_t C = net.spec.classes;
    for (std::size_t t = 0; t < horizon; ++t) conf[t] = double(trace.probs[t].data[label]);
    (void)C;
    return conf;
}

template <typename T>
double transient_noise_dip(Network<T>& net, const Image& img, std::size_t label, const PixelStats& stats,
                           const NoiseSpec& noise, const TemporalKernel& kernel, std::size_t duration,
                           Rng& rng, std::size_t clean_steps = 10) {
    const auto conf = transient_confidences(net, img, label, stats, noise, kernel, duration, rng, clean_steps);
    return drop_in_integrated_performance(conf, clean_steps);
}

// The serial-per-frame baseline: a full feedforward pass on every frame, one
// output per frame; costs (blocks+1) block-update cycles per frame.
template <typename T>
std::vector<double> sequential_confidences(Network<T>& net, const Image& img, std::size_t label,
                                           const PixelStats& stats, const NoiseSpec& noise,
                                           std::size_t duration, Rng& rng, std::size_t clean_frames = 10,
                                           std::size_t* cycles = nullptr) {
    const Image clean = normalize_only(img, stats);
    std::vector<double> conf;
    auto emit = [&](const Image& frame) {
        auto probs = softmax_rows(forward_standard(net, single_input<T>(frame)));
        conf.push_back(double(probs.data[label]));
    };
    for (std::size_t t = 0; t < clean_frames; ++t) emit(clean);
    for (std::size_t t = 0; t < duration; ++t) emit(normalize_only(apply_noise(img, noise, rng), stats));
    for (std::size_t t = 0; t < clean_frames; ++t) emit(clean);
    if (cycles) *cycles = conf.size() * (net.spec.blocks + 1);
    return conf;
}

// Persistent noise: an independent sample corrupts the input at every update
// step; final-step accuracy over `trials` repetitions per image.
template <typename T>
double persistent_noise_accuracy(Network<T>& net, const Dataset& ds,
                                 const std::vector<std::size_t>& indices, const PixelStats& stats,
                                 const NoiseSpec& noise, const TemporalKernel& kernel,
                                 std::size_t horizon, std::size_t trials, std::uint64_t seed) {
    std::vector<double> hits(indices.size(), 0.0);
    parallel_for(indices.size(), [&](std::size_t i) {
        const Image& img = ds.images[indices[i]];
        const std::size_t label = ds.labels[indices[i]];
        double h = 0;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            Rng rng(derive_seed(seed, "persistent-noise", indices[i] * 1000 + trial));
            std::vector<Tensor<T>> frames;
            frames.reserve(horizon);
            for (std::size_t t = 0; t < horizon; ++t)
                frames.push_back(single_input<T>(normalize_only(apply_noise(img, noise, rng), stats)));
            auto trace = run_cascaded(net, frames, horizon, kernel);
            const auto& last = trace.probs.back();
            std::size_t arg = 0;
            for (std::size_t c = 1; c < net.spec.classes; ++c)
                if (last.data[c] > last.data[arg]) arg = c;
            h += arg == label ? 1.0 : 0.0;
        }
        hits[i] = h / double(trials);
    });
    double acc = 0;
    for (double h : hits) acc += h;
    return acc / double(hits.size());
}

} // namespace cascade
