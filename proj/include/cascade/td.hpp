#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascade/net.hpp"
#include "cascade/tape.hpp"

namespace cascade {

struct TDConfig {
    double lambda = 0.0; // prediction-horizon parameter in [0,1]
    std::size_t horizon = 1;

    void validate() const {
        if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("TDConfig: lambda must be in [0,1]");
        if (horizon < 1) throw std::invalid_argument("TDConfig: horizon must be >= 1");
    }
};

// Per-timestep target distributions. Targets are plain values: they blend
// future model outputs with the true label and are constants under
// differentiation, so the loss only sees them through stop-gradient semantics.
template <typename T>
struct TDTargets {
    std::vector<Tensor<T>> y; // horizon entries of [N,C]
    Tensor<T> y_true;         // [N,C] one-hot rows
};

// y_t = (1-lambda) * sum_{i=1..T-t} lambda^(i-1) yhat_{t+i} + lambda^(T-t) * y_true.
// lambda=1 pins every target to the label; lambda=0 pins each step to the
// next step's output (and the label at the final step).
template <typename T>
TDTargets<T> td_targets(const RolloutTrace<T>& trace, const Tensor<T>& y_true, const TDConfig& cfg) {
    cfg.validate();
    if (trace.probs.size() != cfg.horizon)
        throw std::invalid_argument("td_targets: trace length != horizon");
    const std::size_t N = y_true.shape[0], C = y_true.shape[1];
    for (std::size_t n = 0; n < N; ++n) {
        T sum = 0;
        for (std::size_t c = 0; c < C; ++c) sum += y_true.data[n * C + c];
        if (std::abs(sum - T(1)) > T(1e-6))
            throw std::invalid_argument("td_targets: y_true rows must be one-hot");
    }
    const T lam = static_cast<T>(cfg.lambda);
    TDTargets<T> out;
    out.y_true = y_true;
    out.y.reserve(cfg.horizon);
    for (std::size_t t = 1; t <= cfg.horizon; ++t) {
        Tensor<T> yt({N, C});
        T w = T(1) - lam; // (1-lambda) * lambda^(i-1), built incrementally
        T tail = T(1);    // lambda^(T-t)
        for (std::size_t i = 1; i + t <= cfg.horizon; ++i) {
            const auto& yh = trace.probs[t + i - 1];
            for (std::size_t j = 0; j < N * C; ++j) yt.data[j] += w * yh.data[j];
            w *= lam;
            tail *= lam;
        }
        for (std::size_t j = 0; j < N * C; ++j) yt.data[j] += tail * y_true.data[j];
        out.y.push_back(std::move(yt));
    }
    return out;
}

// Summed cross-entropy over the trace, differentiable only through the
// per-step logits. Cross-entropy terms are batch means, so for a single
// example this is exactly sum_t H(y_t, yhat_t).
template <typename T>
Var td_loss(Tape<T>& tape, const std::vector<Var>& logit_vars, const TDTargets<T>& targets) {
    if (logit_vars.size() != targets.y.size())
        throw std::invalid_argument("td_loss: trace/target length mismatch");
    Var total{0};
    bool first = true;
    for (std::size_t t = 0; t < logit_vars.size(); ++t) {
        Var term = tape.softmax_cross_entropy(logit_vars[t], tape.constant(targets.y[t]));
        total = first ? term : tape.add(total, term);
        first = false;
    }
    return total;
}

// Final-step-only cross-entropy, the CE baseline.
template <typename T>
Var ce_loss(Tape<T>& tape, const std::vector<Var>& logit_vars, const Tensor<T>& y_true) {
    if (logit_vars.empty()) throw std::invalid_argument("ce_loss: empty trace");
    return tape.softmax_cross_entropy(logit_vars.back(), tape.constant(y_true));
}

// Decayed accumulator of per-class logit gradients: e_0 = 0,
// e_t = lambda * e_{t-1} + grad_w z_{t,c}.
template <typename T>
class EligibilityTrace {
public:
    EligibilityTrace(std::size_t classes, const std::vector<Tensor<T>>& param_shapes, T decay)
        : decay_(decay) {
        e_.resize(classes);
        for (auto& per_class : e_) {
            per_class.reserve(param_shapes.size());
            for (const auto& p : param_shapes) per_class.push_back(Tensor<T>::zeros(p.shape));
        }
    }

    void update(std::size_t c, const std::vector<Tensor<T>>& logit_grads) {
        auto& ec = e_[c];
        for (std::size_t p = 0; p < ec.size(); ++p) {
            for (std::size_t j = 0; j < ec[p].size(); ++j)
                ec[p].data[j] = decay_ * ec[p].data[j] + logit_grads[p].data[j];
        }
    }

    const std::vector<Tensor<T>>& per_class(std::size_t c) const { return e_[c]; }

private:
    T decay_;
    std::vector<std::vector<Tensor<T>>> e_;
};

// Incremental TD gradient via eligibility traces:
//   grad = -sum_{t,c} (ybar_{t+1,c} - ybar_{t,c}) * e_{t,c}
// with ybar clamping to the true label past the horizon. Numerically equal to
// backpropagating the summed td_loss through the same rollout; kept as the
// online form whose memory cost is one accumulator per (parameter, class).
// Single-example form: x is [1, input_dim]. Refuses to run when the
// accumulators would exceed budget_bytes.
template <typename T>
std::vector<Tensor<T>> td_grad_incremental(Network<T>& net, const Tensor<T>& x,
                                           const Tensor<T>& y_true, const TDConfig& cfg,
                                           const TemporalKernel& kernel,
                                           std::size_t budget_bytes = std::size_t(256) << 20) {
    cfg.validate();
    if (x.shape.size() != 2 || x.shape[0] != 1)
        throw std::invalid_argument("td_grad_incremental: x must be a single example [1,input_dim]");
    const std::size_t C = net.spec.classes;
    const std::size_t need = net.param_count() * C * sizeof(T);
    if (need > budget_bytes)
        throw std::runtime_error("td_grad_incremental: eligibility traces need " + std::to_string(need) +
                                 " bytes (params " + std::to_string(net.param_count()) + " x classes " +
                                 std::to_string(C) + "), budget is " + std::to_string(budget_bytes));

    Tape<T> tape;
    Runtime<T> rt(tape, net, false);
    std::vector<Tensor<T>> frames(cfg.horizon, x);
    Rollout<T> roll = rollout_cascaded(rt, net, frames, cfg.horizon, kernel);

    std::vector<Tensor<T>> param_shapes;
    param_shapes.reserve(net.params.size());
    for (const auto& p : net.params) param_shapes.push_back(Tensor<T>::zeros(p.value.shape));

    EligibilityTrace<T> trace(C, param_shapes, static_cast<T>(cfg.lambda));
    std::vector<Tensor<T>> out = param_shapes;

    auto ybar = [&](std::size_t t, std::size_t c) -> T {
        // t in 1..horizon+1; past the horizon the outcome is the true label
        if (t > cfg.horizon) return y_true.data[c];
        return roll.trace.probs[t - 1].data[c];
    };

    for (std::size_t t = 1; t <= cfg.horizon; ++t) {
        for (std::size_t c = 0; c < C; ++c) {
            Tensor<T> seed({1, C});
            seed.data[c] = T(1);
            tape.backward_seeded(roll.logit_vars[t - 1], std::move(seed));
            trace.update(c, rt.param_grads());
            const T coeff = ybar(t + 1, c) - ybar(t, c);
            const auto& ec = trace.per_class(c);
            for (std::size_t p = 0; p < out.size(); ++p)
                for (std::size_t j = 0; j < out[p].size(); ++j) out[p].data[j] -= coeff * ec[p].data[j];
        }
    }
    return out;
}

} // namespace cascade
