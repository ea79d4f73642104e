#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascade/kernels.hpp"
#include "cascade/norm.hpp"
#include "cascade/rng.hpp"
#include "cascade/tape.hpp"

namespace cascade {

enum class HeadMode { SingleHead, MultiHead };
enum class NetKind { Mlp, Conv };

// Architecture description. Residual blocks are uniform width: hidden units
// for the MLP flavor, channels at fixed spatial size for the conv flavor, so
// the anytime head can read the residual stream at any depth.
struct NetworkSpec {
    NetKind kind = NetKind::Mlp;
    std::size_t input_dim = 0;   // flattened input size (Cin*H*W for conv)
    std::size_t channels_in = 1; // conv geometry; ignored for MLP
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t blocks = 2;      // B >= 1
    std::size_t hidden = 32;     // width (MLP) or channels (conv)
    std::size_t classes = 2;     // C >= 2
    HeadMode head_mode = HeadMode::SingleHead;
    std::size_t horizon = 8;     // T_max: norm-stat slots and multi-head count

    void validate() const {
        if (blocks < 1) throw std::invalid_argument("NetworkSpec: blocks must be >= 1");
        if (classes < 2) throw std::invalid_argument("NetworkSpec: classes must be >= 2");
        if (horizon < 1) throw std::invalid_argument("NetworkSpec: horizon must be >= 1");
        if (input_dim == 0) throw std::invalid_argument("NetworkSpec: input_dim must be set");
        if (kind == NetKind::Conv && channels_in * height * width != input_dim)
            throw std::invalid_argument("NetworkSpec: conv geometry does not match input_dim");
    }

    // Stream width seen by heads and the residual skip path.
    std::size_t stream_dim() const {
        return kind == NetKind::Mlp ? hidden : hidden * height * width;
    }
    // Delay components: stem + one per block.
    std::size_t delay_count() const { return blocks + 1; }
};

// Parameters plus per-layer normalization state. Parameter order is fixed by
// construction and shared with the optimizer and the checkpoint format.
template <typename T>
struct Network {
    struct Param {
        std::string name;
        Tensor<T> value;
        bool decay = false; // weight decay applies to weights only
    };

    NetworkSpec spec;
    std::vector<Param> params;
    std::vector<NormStats<T>> norms; // stem, then per block n1, n2

    // index maps into params/norms
    struct LinearRef { int w = -1, b = -1; };
    struct NormRef { int gamma = -1, beta = -1, stats = -1; };
    struct BlockRef { LinearRef l1, l2; NormRef n1, n2; };
    LinearRef stem;
    NormRef stem_norm;
    std::vector<BlockRef> block_refs;
    std::vector<LinearRef> heads; // 1 entry (SingleHead) or horizon entries

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.value.size();
        return n;
    }
};

// He-normal weight init; offsets zero, norm scale one.
template <typename T>
Network<T> make_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network<T> net;
    net.spec = spec;
    Rng rng(derive_seed(seed, "net-init"));

    auto add_param = [&](const std::string& name, Tensor<T> v, bool decay) {
        net.params.push_back({name, std::move(v), decay});
        return static_cast<int>(net.params.size() - 1);
    };
    auto he = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
        return Tensor<T>::randn({rows, cols}, rng, static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in))));
    };
    auto add_norm = [&](const std::string& prefix, std::size_t K, std::size_t S) {
        typename Network<T>::NormRef ref;
        ref.gamma = add_param(prefix + ".gamma", Tensor<T>::full({K}, T(1)), false);
        ref.beta = add_param(prefix + ".beta", Tensor<T>::zeros({K}), false);
        net.norms.emplace_back(K, S, spec.horizon);
        ref.stats = static_cast<int>(net.norms.size() - 1);
        return ref;
    };

    const bool conv = spec.kind == NetKind::Conv;
    const std::size_t K = spec.hidden;
    const std::size_t S = conv ? spec.height * spec.width : 1;

    if (conv) {
        net.stem.w = add_param("stem.w", he(K, spec.channels_in * 9, spec.channels_in * 9), true);
    } else {
        net.stem.w = add_param("stem.w", he(spec.input_dim, K, spec.input_dim), true);
    }
    net.stem_norm = add_norm("stem.norm", K, S);

    for (std::size_t i = 0; i < spec.blocks; ++i) {
        const std::string bp = "block" + std::to_string(i);
        typename Network<T>::BlockRef b;
        if (conv) {
            b.l1.w = add_param(bp + ".l1.w", he(K, K * 9, K * 9), true);
            b.n1 = add_norm(bp + ".n1", K, S);
            b.l2.w = add_param(bp + ".l2.w", he(K, K * 9, K * 9), true);
            b.n2 = add_norm(bp + ".n2", K, S);
        } else {
            b.l1.w = add_param(bp + ".l1.w", he(K, K, K), true);
            b.n1 = add_norm(bp + ".n1", K, 1);
            b.l2.w = add_param(bp + ".l2.w", he(K, K, K), true);
            b.n2 = add_norm(bp + ".n2", K, 1);
        }
        net.block_refs.push_back(b);
    }

    const std::size_t n_heads = spec.head_mode == HeadMode::SingleHead ? 1 : spec.horizon;
    const std::size_t D = spec.stream_dim();
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::string hp = n_heads == 1 ? "head" : "head" + std::to_string(h);
        typename Network<T>::LinearRef ref;
        ref.w = add_param(hp + ".w", he(D, spec.classes, D), true);
        ref.b = add_param(hp + ".b", Tensor<T>::zeros({spec.classes}), false);
        net.heads.push_back(ref);
    }
    return net;
}

// Per-timestep outputs of one rollout: class distributions, raw logits, the
// head-input embedding at the final step, mode tag and the block-update cycle
// count that makes serial and cascaded runs comparable on one axis.
template <typename T>
struct RolloutTrace {
    std::vector<Tensor<T>> probs;   // T entries of [N,C], rows sum to 1
    std::vector<Tensor<T>> logits;  // T entries of [N,C]
    Tensor<T> final_embedding;      // [N, stream_dim]
    std::string mode;               // "cascaded" | "serial" | "standard"
    std::size_t cycles = 0;
};

template <typename T>
struct Rollout {
    RolloutTrace<T> trace;
    std::vector<Var> logit_vars; // tape nodes, one per step, for the loss
};

// Binds a network's parameters onto a tape as differentiable leaves and runs
// layers with the right per-timestep normalization slot.
template <typename T>
class Runtime {
public:
    Runtime(Tape<T>& tape, Network<T>& net, bool training)
        : tape_(tape), net_(net), training_(training) {
        vars_.reserve(net.params.size());
        for (auto& p : net.params) vars_.push_back(tape_.leaf(p.value));
    }

    Var param(int idx) const { return vars_[static_cast<std::size_t>(idx)]; }
    const std::vector<Var>& param_vars() const { return vars_; }
    Tape<T>& tape() { return tape_; }

    // Collect dL/dp for every parameter after a backward pass.
    std::vector<Tensor<T>> param_grads() const {
        std::vector<Tensor<T>> out;
        out.reserve(vars_.size());
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            const auto& g = tape_.grad(vars_[i]);
            out.push_back(g.data.size() == net_.params[i].value.data.size()
                              ? g
                              : Tensor<T>::zeros(net_.params[i].value.shape));
        }
        return out;
    }

    // Stem: linear/conv (no bias) -> norm at timestep t -> ReLU.
    Var stem(Var x, std::size_t t) {
        Var pre = apply_linear(x, net_.stem.w, net_.spec.channels_in);
        Var normed = normalize(tape_, pre, net_.norms[net_.stem_norm.stats],
                               param(net_.stem_norm.gamma), param(net_.stem_norm.beta), t, training_);
        return tape_.relu(normed);
    }

    // Residual transform F for block i at timestep t (no skip, no final ReLU;
    // the skip path stays unnormalized).
    Var block_f(std::size_t i, Var z, std::size_t t) {
        const auto& b = net_.block_refs[i];
        Var h = apply_linear(z, b.l1.w, net_.spec.hidden);
        h = normalize(tape_, h, net_.norms[b.n1.stats], param(b.n1.gamma), param(b.n1.beta), t, training_);
        h = tape_.relu(h);
        h = apply_linear(h, b.l2.w, net_.spec.hidden);
        h = normalize(tape_, h, net_.norms[b.n2.stats], param(b.n2.gamma), param(b.n2.beta), t, training_);
        return h;
    }

    Var head(Var z, std::size_t t) {
        const auto& ref = net_.heads.size() == 1
                              ? net_.heads[0]
                              : net_.heads[std::min(t, net_.heads.size()) - 1];
        return tape_.add_rows(tape_.matmul(z, param(ref.w)), param(ref.b));
    }

private:
    Tape<T>& tape_;
    Network<T>& net_;
    bool training_;
    std::vector<Var> vars_;

    Var apply_linear(Var x, int w_idx, std::size_t cin) {
        if (net_.spec.kind == NetKind::Mlp) return tape_.matmul(x, param(w_idx));
        return tape_.conv2d(x, param(w_idx), cin, net_.spec.height, net_.spec.width, 3, 3);
    }
};

// Single-pass feedforward output: the asymptotic network with instantaneous
// transmission. Norm layers read their final-timestep statistics.
template <typename T>
Var forward_standard_var(Runtime<T>& rt, Network<T>& net, Var x) {
    const std::size_t tN = net.spec.horizon;
    Var z = rt.stem(x, tN);
    for (std::size_t i = 0; i < net.spec.blocks; ++i)
        z = rt.tape().relu(rt.tape().add(z, rt.block_f(i, z, tN)));
    return rt.head(z, tN);
}

template <typename T>
Tensor<T> forward_standard(Network<T>& net, const Tensor<T>& x) {
    Tape<T> tape;
    Runtime<T> rt(tape, net, false);
    Var logits = forward_standard_var(rt, net, tape.constant(x));
    return tape.value(logits);
}

// Cascaded rollout: all blocks update in parallel each step; the skip path is
// instantaneous within a step while each transform output crosses its delay
// line. The stem's first-frame output is latched into its delay line at
// stimulus onset, so with the one-step-delay kernel the trace reaches the
// standard feedforward output at step D = blocks + 1.
template <typename T>
Rollout<T> rollout_cascaded(Runtime<T>& rt, Network<T>& net, const std::vector<Tensor<T>>& frames,
                            std::size_t horizon, const TemporalKernel& kernel) {
    if (frames.size() != horizon)
        throw std::invalid_argument("rollout_cascaded: need one input frame per step (repeat a static input)");
    if (horizon < 1) throw std::invalid_argument("rollout_cascaded: T must be >= 1");
    Tape<T>& tape = rt.tape();
    const std::size_t B = net.spec.blocks;

    DelayLine<T> stem_line(kernel);
    std::vector<DelayLine<T>> lines(B, DelayLine<T>(kernel));

    Rollout<T> out;
    out.trace.mode = "cascaded";
    out.trace.cycles = horizon;

    Var z{0};
    for (std::size_t t = 1; t <= horizon; ++t) {
        Var s = rt.stem(tape.constant(frames[t - 1]), t);
        if (t == 1) stem_line.push(tape, s); // onset latch of frame 1
        z = stem_line.push(tape, s);
        for (std::size_t i = 0; i < B; ++i) {
            Var f = rt.block_f(i, z, t);
            Var d = lines[i].push(tape, f);
            z = tape.relu(tape.add(z, d));
        }
        Var logits = rt.head(z, t);
        out.logit_vars.push_back(logits);
        out.trace.logits.push_back(tape.value(logits));
        out.trace.probs.push_back(softmax_rows(tape.value(logits)));
    }
    out.trace.final_embedding = tape.value(z);
    return out;
}

// Serial rollout: one block update per cycle. At step t the stem and blocks
// 1..t-1 have executed; the head reads the running residual-stream value.
// Norm layers read asymptotic (final-slot) statistics in both modes, so the
// final step reproduces forward_standard exactly.
template <typename T>
Rollout<T> rollout_serial_anytime(Runtime<T>& rt, Network<T>& net, const Tensor<T>& x,
                                  std::size_t horizon) {
    const std::size_t B = net.spec.blocks;
    if (horizon < B + 1)
        throw std::invalid_argument("rollout_serial_anytime: T must be >= blocks+1 so every block fires");
    Tape<T>& tape = rt.tape();
    const std::size_t tN = net.spec.horizon;

    Rollout<T> out;
    out.trace.mode = "serial";
    out.trace.cycles = horizon;

    Var r = rt.stem(tape.constant(x), tN);
    for (std::size_t t = 1; t <= horizon; ++t) {
        if (t >= 2 && t - 2 < B) r = tape.relu(tape.add(r, rt.block_f(t - 2, r, tN)));
        Var logits = rt.head(r, t);
        out.logit_vars.push_back(logits);
        out.trace.logits.push_back(tape.value(logits));
        out.trace.probs.push_back(softmax_rows(tape.value(logits)));
    }
    out.trace.final_embedding = tape.value(r);
    return out;
}

// Convenience eval-mode wrappers that own their tape.
template <typename T>
RolloutTrace<T> run_cascaded(Network<T>& net, const std::vector<Tensor<T>>& frames,
                             std::size_t horizon, const TemporalKernel& kernel) {
    Tape<T> tape;
    Runtime<T> rt(tape, net, false);
    return rollout_cascaded(rt, net, frames, horizon, kernel).trace;
}

template <typename T>
RolloutTrace<T> run_cascaded_static(Network<T>& net, const Tensor<T>& x, std::size_t horizon,
                                    const TemporalKernel& kernel) {
    std::vector<Tensor<T>> frames(horizon, x);
    return run_cascaded(net, frames, horizon, kernel);
}

template <typename T>
RolloutTrace<T> run_serial(Network<T>& net, const Tensor<T>& x, std::size_t horizon) {
    Tape<T> tape;
    Runtime<T> rt(tape, net, false);
    return rollout_serial_anytime(rt, net, x, horizon).trace;
}

} // namespace cascade
