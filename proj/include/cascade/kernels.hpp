#pragma once

#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascade/tape.hpp"

namespace cascade {

enum class KernelKind { Identity, OneStepDelay, ExpWeightedSmoothing, Explicit };

// Temporal kernel convolved with a block's output history. Identity is the
// instantaneous (standard feedforward) case, OneStepDelay shifts by one step,
// ExpWeightedSmoothing blends the history with geometric weights (1-a)*a^i.
struct TemporalKernel {
    KernelKind kind = KernelKind::Identity;
    double alpha = 0.0;                  // smoothing factor, EWS only, in [0,1)
    std::vector<double> explicit_weights; // Explicit only; finite, non-negative

    static TemporalKernel identity() { return {KernelKind::Identity, 0.0, {}}; }
    static TemporalKernel osd() { return {KernelKind::OneStepDelay, 0.0, {}}; }
    static TemporalKernel ews(double alpha) {
        if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("ews: alpha must be in [0,1)");
        return {KernelKind::ExpWeightedSmoothing, alpha, {}};
    }
    static TemporalKernel explicit_kernel(std::vector<double> w) {
        for (double v : w)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("explicit kernel: weights must be finite and non-negative");
        return {KernelKind::Explicit, 0.0, std::move(w)};
    }
};

inline TemporalKernel kernel_from_name(const std::string& name, double alpha) {
    if (name == "identity") return TemporalKernel::identity();
    if (name == "osd") return TemporalKernel::osd();
    if (name == "ews") return TemporalKernel::ews(alpha);
    throw std::invalid_argument("unknown kernel '" + name + "' (expected identity|osd|ews)");
}

inline const char* kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Identity: return "identity";
        case KernelKind::OneStepDelay: return "osd";
        case KernelKind::ExpWeightedSmoothing: return "ews";
        default: return "explicit";
    }
}

// First `length` kernel weights. The truncated EWS tail mass alpha^length is
// not renormalized; that keeps the weights identical to what the incremental
// recurrence realizes at finite time.
inline std::vector<double> kernel_weights(const TemporalKernel& k, std::size_t length) {
    if (length < 1) throw std::invalid_argument("kernel_weights: length must be >= 1");
    std::vector<double> w(length, 0.0);
    switch (k.kind) {
        case KernelKind::Identity:
            w[0] = 1.0;
            break;
        case KernelKind::OneStepDelay:
            if (length >= 2) w[1] = 1.0;
            break;
        case KernelKind::ExpWeightedSmoothing: {
            double p = 1.0 - k.alpha;
            for (std::size_t i = 0; i < length; ++i) {
                w[i] = p;
                p *= k.alpha;
            }
            break;
        }
        case KernelKind::Explicit:
            for (std::size_t i = 0; i < length && i < k.explicit_weights.size(); ++i)
                w[i] = k.explicit_weights[i];
            break;
    }
    return w;
}

// Per-block delay-line state. Pushes live on the caller's tape so gradients
// flow through the weighted history during training rollouts. Storage follows
// the kernel: EWS keeps only the smoothed node (O(1)), OSD a one-element
// queue, Explicit the full history. Zero history at t=0, so the first OSD
// output is the zero tensor.
template <typename T>
class DelayLine {
public:
    explicit DelayLine(TemporalKernel kernel) : kernel_(std::move(kernel)) {}

    std::size_t step() const { return t_; }

    // Push z' for the current step and return the kernel-weighted combination
    // of the history including the new entry. Advances t.
    Var push(Tape<T>& tape, Var z_prime) {
        const auto& z = tape.value(z_prime);
        if (shape_.has_value() && *shape_ != z.shape)
            throw std::invalid_argument("DelayLine: shape mismatch, expected " + shape_str(*shape_) +
                                        " got " + shape_str(z.shape));
        shape_ = z.shape;
        ++t_;
        switch (kernel_.kind) {
            case KernelKind::Identity:
                return z_prime;
            case KernelKind::OneStepDelay: {
                Var out = prev_.has_value() ? *prev_ : tape.constant(Tensor<T>::zeros(z.shape));
                prev_ = z_prime;
                return out;
            }
            case KernelKind::ExpWeightedSmoothing: {
                const T a = static_cast<T>(kernel_.alpha);
                Var scaled = tape.scale(z_prime, T(1) - a);
                state_ = state_.has_value() ? tape.add(tape.scale(*state_, a), scaled) : scaled;
                return *state_;
            }
            case KernelKind::Explicit: {
                history_.push_front(z_prime);
                if (history_.size() > kernel_.explicit_weights.size()) history_.pop_back();
                std::optional<Var> acc;
                for (std::size_t i = 0; i < history_.size(); ++i) {
                    const double w = i < kernel_.explicit_weights.size() ? kernel_.explicit_weights[i] : 0.0;
                    if (w == 0.0) continue;
                    Var term = tape.scale(history_[i], static_cast<T>(w));
                    acc = acc.has_value() ? tape.add(*acc, term) : term;
                }
                return acc.has_value() ? *acc : tape.constant(Tensor<T>::zeros(z.shape));
            }
        }
        throw std::logic_error("DelayLine: unreachable");
    }

private:
    TemporalKernel kernel_;
    std::size_t t_ = 0;
    std::optional<Shape> shape_;
    std::optional<Var> prev_;          // OSD
    std::optional<Var> state_;         // EWS smoothed node
    std::deque<Var> history_;          // Explicit, newest first
};

} // namespace cascade
