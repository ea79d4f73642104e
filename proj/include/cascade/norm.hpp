#pragma once

#include <vector>

#include "cascade/tape.hpp"

namespace cascade {

// Running statistics for one normalization layer, tracked independently for
// each timestep t = 1..horizon. Queries past the horizon clamp to the final
// timestep's statistics. Scale/offset parameters are shared across timesteps
// and live in the network's parameter registry, not here.
template <typename T>
struct NormStats {
    std::size_t groups = 0;      // K: normalized features (or channels)
    std::size_t group_size = 1;  // S: elements per group (H*W for conv, 1 for MLP)
    T momentum = T(0.1);
    T eps = T(1e-5);
    std::vector<Tensor<T>> run_mean; // horizon entries of [K]
    std::vector<Tensor<T>> run_var;  // horizon entries of [K], init 1

    NormStats() = default;
    NormStats(std::size_t K, std::size_t S, std::size_t horizon) : groups(K), group_size(S) {
        run_mean.assign(horizon, Tensor<T>::zeros({K}));
        run_var.assign(horizon, Tensor<T>::full({K}, T(1)));
    }

    std::size_t clamp_t(std::size_t t) const {
        const std::size_t horizon = run_mean.size();
        return std::min(std::max<std::size_t>(t, 1), horizon) - 1; // 0-based slot
    }
};

// Batch normalization over groups at timestep t. Training mode normalizes by
// the batch statistics of step t (differentiably) and folds them into the
// running statistics of slot min(t, horizon); eval mode normalizes by the
// stored running statistics of that slot. Biased variance throughout.
template <typename T>
Var normalize(Tape<T>& tape, Var x, NormStats<T>& stats, Var gamma, Var beta,
              std::size_t t, bool training) {
    const std::size_t N = tape.value(x).shape[0];
    const std::size_t K = stats.groups, S = stats.group_size;
    const std::size_t slot = stats.clamp_t(t);
    Var mu, var;
    if (training) {
        mu = tape.mean_groups(x, K, S);
        Var xc0 = tape.sub(x, tape.broadcast_groups(mu, N, K, S));
        var = tape.mean_groups(tape.mul(xc0, xc0), K, S);
        const auto& m = tape.value(mu);
        const auto& v = tape.value(var);
        for (std::size_t k = 0; k < K; ++k) {
            stats.run_mean[slot].data[k] = (T(1) - stats.momentum) * stats.run_mean[slot].data[k] + stats.momentum * m.data[k];
            stats.run_var[slot].data[k] = (T(1) - stats.momentum) * stats.run_var[slot].data[k] + stats.momentum * v.data[k];
        }
    } else {
        mu = tape.constant(stats.run_mean[slot]);
        var = tape.constant(stats.run_var[slot]);
    }
    Var xc = tape.sub(x, tape.broadcast_groups(mu, N, K, S));
    Var inv = tape.rsqrt(tape.add_scalar(var, stats.eps));
    Var xhat = tape.mul(xc, tape.broadcast_groups(inv, N, K, S));
    return tape.add(tape.mul(xhat, tape.broadcast_groups(gamma, N, K, S)),
                    tape.broadcast_groups(beta, N, K, S));
}

} // namespace cascade
