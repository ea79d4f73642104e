#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "cascade/tensor.hpp"

namespace cascade {

// Handle to a tape node. Valid only for the tape that produced it.
struct Var {
    std::uint32_t id = 0;
};

// Reverse-mode differentiation tape, define-by-run: a fresh tape is built per
// forward pass and construction order is the topological order. backward()
// walks the nodes once in reverse. Nodes unreachable from a differentiable
// leaf carry requires_grad=false and are skipped entirely, which is what makes
// stop_gradient contribute exactly zero rather than approximately zero.
//
// A tape and its tensors belong to one logical thread; run distinct tapes on
// distinct threads if you want parallelism.
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- node creation --------------------------------------------------

    // Differentiable leaf (parameters, inputs under test).
    Var leaf(Tensor<T> v) { return push(std::move(v), true); }

    // Non-differentiable constant.
    Var constant(Tensor<T> v) { return push(std::move(v), false); }

    const Tensor<T>& value(Var x) const { return nodes_[x.id].value; }
    const Tensor<T>& grad(Var x) const { return nodes_[x.id].grad; }
    std::size_t size() const { return nodes_.size(); }

    // ---- primitives ------------------------------------------------------

    // [N,K] x [K,M] -> [N,M]
    Var matmul(Var a, Var b) {
        const auto& A = value(a);
        const auto& B = value(b);
        if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
            throw std::invalid_argument("matmul: incompatible shapes " + shape_str(A.shape) + " x " + shape_str(B.shape));
        const std::size_t N = A.shape[0], K = A.shape[1], M = B.shape[1];
        Tensor<T> out({N, M});
        matmul_into(out.data.data(), A.data.data(), B.data.data(), N, K, M, false, false);
        Var y = push(std::move(out), needs(a) || needs(b));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, a, b, N, K, M](const Tensor<T>& g) {
                if (needs(a)) // dA = G * B^T
                    matmul_into(grad_buf(a).data.data(), g.data.data(), value(b).data.data(), N, M, K, false, true);
                if (needs(b)) // dB = A^T * G
                    matmul_into(grad_buf(b).data.data(), value(a).data.data(), g.data.data(), K, N, M, true, false);
            };
        }
        return y;
    }

    // Elementwise a + b, identical shapes.
    Var add(Var a, Var b) {
        const auto& A = value(a);
        const auto& B = value(b);
        require_same_shape(A, B, "add");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
        Var y = push(std::move(out), needs(a) || needs(b));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, a, b](const Tensor<T>& g) {
                if (needs(a)) accumulate(a, g);
                if (needs(b)) accumulate(b, g);
            };
        }
        return y;
    }

    // Elementwise a - b, identical shapes.
    Var sub(Var a, Var b) {
        const auto& A = value(a);
        const auto& B = value(b);
        require_same_shape(A, B, "sub");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= B.data[i];
        Var y = push(std::move(out), needs(a) || needs(b));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, a, b](const Tensor<T>& g) {
                if (needs(a)) accumulate(a, g);
                if (needs(b)) {
                    auto& gb = grad_buf(b);
                    for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
                }
            };
        }
        return y;
    }

    // Elementwise product, identical shapes.
    Var mul(Var a, Var b) {
        const auto& A = value(a);
        const auto& B = value(b);
        require_same_shape(A, B, "mul");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
        Var y = push(std::move(out), needs(a) || needs(b));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, a, b](const Tensor<T>& g) {
                if (needs(a)) {
                    auto& ga = grad_buf(a);
                    const auto& B2 = value(b);
                    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * B2.data[i];
                }
                if (needs(b)) {
                    auto& gb = grad_buf(b);
                    const auto& A2 = value(a);
                    for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * A2.data[i];
                }
            };
        }
        return y;
    }

    // x * c for a compile-time constant scalar.
    Var scale(Var a, T c) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) v *= c;
        Var y = push(std::move(out), needs(a));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, a, c](const Tensor<T>& g) {
                auto& ga = grad_buf(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * c;
            };
        }
        return y;
    }

    Var add_scalar(Var a, T c) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) v += c;
        Var y = push(std::move(out), needs(a));
        if (nodes_[y.id].requires_grad)
            nodes_[y.id].backward = [this, a](const Tensor<T>& g) { accumulate(a, g); };
        return y;
    }

    // [N,F] + [F], the row-broadcast bias add.
    Var add_rows(Var x, Var r) {
        const auto& X = value(x);
        const auto& R = value(r);
        if (X.shape.size() != 2 || R.shape.size() != 1 || X.shape[1] != R.shape[0])
            throw std::invalid_argument("add_rows: need [N,F] + [F]");
        const std::size_t N = X.shape[0], F = X.shape[1];
        Tensor<T> out = X;
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t f = 0; f < F; ++f) out.data[n * F + f] += R.data[f];
        Var y = push(std::move(out), needs(x) || needs(r));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, x, r, N, F](const Tensor<T>& g) {
                if (needs(x)) accumulate(x, g);
                if (needs(r)) {
                    auto& gr = grad_buf(r);
                    for (std::size_t n = 0; n < N; ++n)
                        for (std::size_t f = 0; f < F; ++f) gr.data[f] += g.data[n * F + f];
                }
            };
        }
        return y;
    }

    // max(x, 0); subgradient at 0 is taken as 0.
    Var relu(Var a) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) v = v > T(0) ? v : T(0);
        Var y = push(std::move(out), needs(a));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, a](const Tensor<T>& g) {
                auto& ga = grad_buf(a);
                const auto& A = value(a);
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (A.data[i] > T(0)) ga.data[i] += g.data[i];
            };
        }
        return y;
    }

    // Elementwise 1/sqrt(x); pre: x > 0.
    Var rsqrt(Var a) {
        Tensor<T> out = value(a);
        for (auto& v : out.data) v = T(1) / std::sqrt(v);
        Var y = push(std::move(out), needs(a));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, a, y](const Tensor<T>& g) {
                auto& ga = grad_buf(a);
                const auto& Y = value(y);
                // d(x^-1/2)/dx = -1/2 x^-3/2 = -y^3/2
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga.data[i] += g.data[i] * T(-0.5) * Y.data[i] * Y.data[i] * Y.data[i];
            };
        }
        return y;
    }

    // Mean over rows and within-group columns: x is [N, K*S] seen as [N,K,S],
    // result is [K]. S=1 gives the per-feature batch mean used by the MLP
    // normalizer; S=H*W gives the per-channel mean used by conv layers.
    Var mean_groups(Var x, std::size_t K, std::size_t S) {
        const auto& X = value(x);
        if (X.shape.size() != 2 || X.shape[1] != K * S)
            throw std::invalid_argument("mean_groups: x must be [N," + std::to_string(K * S) + "]");
        const std::size_t N = X.shape[0];
        Tensor<T> out({K});
        const T inv = T(1) / static_cast<T>(N * S);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t s = 0; s < S; ++s) out.data[k] += X.data[(n * K + k) * S + s];
        for (auto& v : out.data) v *= inv;
        Var y = push(std::move(out), needs(x));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, x, N, K, S, inv](const Tensor<T>& g) {
                auto& gx = grad_buf(x);
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t k = 0; k < K; ++k)
                        for (std::size_t s = 0; s < S; ++s) gx.data[(n * K + k) * S + s] += g.data[k] * inv;
            };
        }
        return y;
    }

    // [K] -> [N, K*S], inverse layout of mean_groups.
    Var broadcast_groups(Var v, std::size_t N, std::size_t K, std::size_t S) {
        const auto& V = value(v);
        if (V.shape.size() != 1 || V.shape[0] != K)
            throw std::invalid_argument("broadcast_groups: v must be [K]");
        Tensor<T> out({N, K * S});
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t s = 0; s < S; ++s) out.data[(n * K + k) * S + s] = V.data[k];
        Var y = push(std::move(out), needs(v));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, v, N, K, S](const Tensor<T>& g) {
                auto& gv = grad_buf(v);
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t k = 0; k < K; ++k)
                        for (std::size_t s = 0; s < S; ++s) gv.data[k] += g.data[(n * K + k) * S + s];
            };
        }
        return y;
    }

    // Mean over every element -> scalar.
    Var mean_all(Var x) {
        const auto& X = value(x);
        T acc = 0;
        for (auto v : X.data) acc += v;
        const T inv = T(1) / static_cast<T>(X.size());
        Var y = push(Tensor<T>::scalar(acc * inv), needs(x));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, x, inv](const Tensor<T>& g) {
                auto& gx = grad_buf(x);
                for (auto& v : gx.data) v += g.data[0] * inv;
            };
        }
        return y;
    }

    Var sum_all(Var x) {
        const auto& X = value(x);
        T acc = 0;
        for (auto v : X.data) acc += v;
        Var y = push(Tensor<T>::scalar(acc), needs(x));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, x](const Tensor<T>& g) {
                auto& gx = grad_buf(x);
                for (auto& v : gx.data) v += g.data[0];
            };
        }
        return y;
    }

    // Row-wise softmax on [N,C], max-subtraction stabilized.
    Var softmax(Var x) {
        const auto& X = value(x);
        if (X.shape.size() != 2) throw std::invalid_argument("softmax: x must be [N,C]");
        const std::size_t N = X.shape[0], C = X.shape[1];
        Tensor<T> out({N, C});
        softmax_rows_into(out.data.data(), X.data.data(), N, C);
        Var y = push(std::move(out), needs(x));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, x, y, N, C](const Tensor<T>& g) {
                auto& gx = grad_buf(x);
                const auto& P = value(y);
                for (std::size_t n = 0; n < N; ++n) {
                    T dot = 0;
                    for (std::size_t c = 0; c < C; ++c) dot += g.data[n * C + c] * P.data[n * C + c];
                    for (std::size_t c = 0; c < C; ++c)
                        gx.data[n * C + c] += P.data[n * C + c] * (g.data[n * C + c] - dot);
                }
            };
        }
        return y;
    }

    // Fused cross-entropy of softmax(logits) against a target distribution,
    // averaged over rows. Gradient w.r.t. logits is (softmax - target)/N; the
    // target, when differentiable, receives -log softmax(logits)/N.
    Var softmax_cross_entropy(Var logits, Var target) {
        const auto& L = value(logits);
        const auto& Y = value(target);
        if (L.shape.size() != 2 || Y.shape != L.shape)
            throw std::invalid_argument("softmax_cross_entropy: logits/target must both be [N,C]");
        const std::size_t N = L.shape[0], C = L.shape[1];
        for (std::size_t n = 0; n < N; ++n) {
            T sum = 0;
            for (std::size_t c = 0; c < C; ++c) {
                const T t = Y.data[n * C + c];
                if (t < T(-1e-9)) throw std::invalid_argument("softmax_cross_entropy: negative target entry");
                sum += t;
            }
            if (std::abs(sum - T(1)) > T(1e-6))
                throw std::invalid_argument("softmax_cross_entropy: target row does not sum to 1");
        }
        Tensor<T> probs({N, C});
        softmax_rows_into(probs.data.data(), L.data.data(), N, C);
        T loss = 0;
        for (std::size_t i = 0; i < N * C; ++i)
            if (Y.data[i] > T(0)) loss -= Y.data[i] * std::log(probs.data[i]);
        loss /= static_cast<T>(N);
        Var y = push(Tensor<T>::scalar(loss), needs(logits) || needs(target));
        if (nodes_[y.id].requires_grad) {
            auto probs_held = std::make_shared<Tensor<T>>(std::move(probs));
            nodes_[y.id].backward = [this, logits, target, probs_held, N, C](const Tensor<T>& g) {
                const T go = g.data[0] / static_cast<T>(N);
                if (needs(logits)) {
                    auto& gl = grad_buf(logits);
                    const auto& Y2 = value(target);
                    for (std::size_t i = 0; i < N * C; ++i)
                        gl.data[i] += go * (probs_held->data[i] - Y2.data[i]);
                }
                if (needs(target)) {
                    auto& gt = grad_buf(target);
                    for (std::size_t i = 0; i < N * C; ++i)
                        gt.data[i] -= go * std::log(probs_held->data[i]);
                }
            };
        }
        return y;
    }

    // Binary cross-entropy on sigmoid(logit) against labels in [0,1],
    // averaged over all entries; the stable softplus form.
    Var logistic_bce(Var logit, Var label) {
        const auto& Z = value(logit);
        const auto& Y = value(label);
        require_same_shape(Z, Y, "logistic_bce");
        const std::size_t n = Z.size();
        T loss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const T z = Z.data[i];
            // softplus(z) - y*z, with softplus(z) = max(z,0) + log1p(exp(-|z|))
            loss += (z > T(0) ? z : T(0)) + std::log1p(std::exp(-std::abs(z))) - Y.data[i] * z;
        }
        loss /= static_cast<T>(n);
        Var y = push(Tensor<T>::scalar(loss), needs(logit));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, logit, label, n](const Tensor<T>& g) {
                const T go = g.data[0] / static_cast<T>(n);
                auto& gz = grad_buf(logit);
                const auto& Z2 = value(logit);
                const auto& Y2 = value(label);
                for (std::size_t i = 0; i < n; ++i) {
                    const T s = T(1) / (T(1) + std::exp(-Z2.data[i]));
                    gz.data[i] += go * (s - Y2.data[i]);
                }
            };
        }
        return y;
    }

    // conv2d, stride 1, same (zero) padding. x is [N, Cin*H*W], w is
    // [Cout, Cin*kh*kw]; kh, kw odd. Output [N, Cout*H*W].
    Var conv2d(Var x, Var w, std::size_t Cin, std::size_t H, std::size_t W,
               std::size_t kh, std::size_t kw) {
        const auto& X = value(x);
        const auto& Wt = value(w);
        if (X.shape.size() != 2 || X.shape[1] != Cin * H * W)
            throw std::invalid_argument("conv2d: x must be [N,Cin*H*W]");
        if (Wt.shape.size() != 2 || Wt.shape[1] != Cin * kh * kw)
            throw std::invalid_argument("conv2d: w must be [Cout,Cin*kh*kw]");
        if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d: kernel dims must be odd");
        const std::size_t N = X.shape[0], Cout = Wt.shape[0];
        const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
        Tensor<T> out({N, Cout * H * W});
        auto xat = [&](std::size_t n, std::size_t c, long i, long j) -> T {
            if (i < 0 || j < 0 || i >= static_cast<long>(H) || j >= static_cast<long>(W)) return T(0);
            return X.data[((n * Cin + c) * H + i) * W + j];
        };
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t co = 0; co < Cout; ++co)
                for (std::size_t i = 0; i < H; ++i)
                    for (std::size_t j = 0; j < W; ++j) {
                        T acc = 0;
                        for (std::size_t ci = 0; ci < Cin; ++ci)
                            for (std::size_t u = 0; u < kh; ++u)
                                for (std::size_t v = 0; v < kw; ++v)
                                    acc += xat(n, ci, static_cast<long>(i) + static_cast<long>(u) - ph,
                                               static_cast<long>(j) + static_cast<long>(v) - pw) *
                                           Wt.data[(co * Cin + ci) * kh * kw + u * kw + v];
                        out.data[((n * Cout + co) * H + i) * W + j] = acc;
                    }
        Var y = push(std::move(out), needs(x) || needs(w));
        if (nodes_[y.id].requires_grad) {
            nodes_[y.id].backward = [this, x, w, Cin, H, W, kh, kw, N, Cout, ph, pw](const Tensor<T>& g) {
                const auto& X2 = value(x);
                const auto& W2 = value(w);
                auto inb = [&](long i, long j) {
                    return i >= 0 && j >= 0 && i < static_cast<long>(H) && j < static_cast<long>(W);
                };
                if (needs(x)) {
                    auto& gx = grad_buf(x);
                    for (std::size_t n = 0; n < N; ++n)
                        for (std::size_t co = 0; co < Cout; ++co)
                            for (std::size_t i = 0; i < H; ++i)
                                for (std::size_t j = 0; j < W; ++j) {
                                    const T go = g.data[((n * Cout + co) * H + i) * W + j];
                                    for (std::size_t ci = 0; ci < Cin; ++ci)
                                        for (std::size_t u = 0; u < kh; ++u)
                                            for (std::size_t v = 0; v < kw; ++v) {
                                                const long si = static_cast<long>(i) + static_cast<long>(u) - ph;
                                                const long sj = static_cast<long>(j) + static_cast<long>(v) - pw;
                                                if (inb(si, sj))
                                                    gx.data[((n * Cin + ci) * H + si) * W + sj] +=
                                                        go * W2.data[(co * Cin + ci) * kh * kw + u * kw + v];
                                            }
                                }
                }
                if (needs(w)) {
                    auto& gw = grad_buf(w);
                    for (std::size_t n = 0; n < N; ++n)
                        for (std::size_t co = 0; co < Cout; ++co)
                            for (std::size_t i = 0; i < H; ++i)
                                for (std::size_t j = 0; j < W; ++j) {
                                    const T go = g.data[((n * Cout + co) * H + i) * W + j];
                                    for (std::size_t ci = 0; ci < Cin; ++ci)
                                        for (std::size_t u = 0; u < kh; ++u)
                                            for (std::size_t v = 0; v < kw; ++v) {
                                                const long si = static_cast<long>(i) + static_cast<long>(u) - ph;
                                                const long sj = static_cast<long>(j) + static_cast<long>(v) - pw;
                                                if (inb(si, sj))
                                                    gw.data[(co * Cin + ci) * kh * kw + u * kw + v] +=
                                                        go * X2.data[((n * Cin + ci) * H + si) * W + sj];
                                            }
                                }
                }
            };
        }
        return y;
    }

    // Value passes through untouched; backward propagates exactly zero.
    Var stop_gradient(Var a) { return push(Tensor<T>(value(a)), false); }

    // ---- backward --------------------------------------------------------

    // Backpropagate from a scalar root with seed 1.
    void backward(Var root) {
        const auto& R = value(root);
        if (!R.is_scalar())
            throw std::invalid_argument("backward: root must be a scalar, got shape " + shape_str(R.shape));
        backward_seeded(root, Tensor<T>::scalar(T(1)));
    }

    // General vector-Jacobian product from any node.
    void backward_seeded(Var root, Tensor<T> seed) {
        if (seed.shape != value(root).shape)
            throw std::invalid_argument("backward_seeded: seed shape mismatch");
        zero_grad();
        if (!nodes_[root.id].requires_grad) return;
        nodes_[root.id].grad = std::move(seed);
        nodes_[root.id].grad_live = true;
        for (std::size_t i = root.id + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.requires_grad || !n.grad_live || !n.backward) continue;
            n.backward(n.grad);
        }
    }

    void zero_grad() {
        for (auto& n : nodes_) {
            if (n.grad_live) {
                std::fill(n.grad.data.begin(), n.grad.data.end(), T(0));
                n.grad_live = false;
            }
        }
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool grad_live = false;
        bool requires_grad = false;
        std::function<void(const Tensor<T>&)> backward;
    };

    std::vector<Node> nodes_;

    bool needs(Var x) const { return nodes_[x.id].requires_grad; }

    Tensor<T>& grad_buf(Var x) {
        auto& n = nodes_[x.id];
        if (!n.grad_live) {
            if (n.grad.data.size() != n.value.data.size()) n.grad = Tensor<T>::zeros(n.value.shape);
            n.grad.shape = n.value.shape;
            n.grad_live = true;
        }
        return n.grad;
    }

    void accumulate(Var x, const Tensor<T>& g) {
        auto& gx = grad_buf(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    }

    Var push(Tensor<T> v, bool requires_grad) {
        Node n;
        n.value = std::move(v);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    static void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
        if (a.shape != b.shape)
            throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }

    // C (+)= op(A) * op(B); transposition by flag, plain ikj loops.
    static void matmul_into(T* C, const T* A, const T* B, std::size_t N, std::size_t K, std::size_t M,
                            bool transA, bool transB) {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k) {
                const T a = transA ? A[k * N + n] : A[n * K + k];
                if (a == T(0)) continue;
                if (!transB) {
                    const T* brow = B + k * M;
                    T* crow = C + n * M;
                    for (std::size_t m = 0; m < M; ++m) crow[m] += a * brow[m];
                } else {
                    T* crow = C + n * M;
                    for (std::size_t m = 0; m < M; ++m) crow[m] += a * B[m * K + k];
                }
            }
    }

    static void softmax_rows_into(T* out, const T* in, std::size_t N, std::size_t C) {
        // same arithmetic as the free softmax_rows, bit for bit
        for (std::size_t n = 0; n < N; ++n) {
            const T* row = in + n * C;
            T* orow = out + n * C;
            T mx = row[0];
            for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
            T sum = 0;
            for (std::size_t c = 0; c < C; ++c) {
                orow[c] = std::exp(row[c] - mx);
                sum += orow[c];
            }
            for (std::size_t c = 0; c < C; ++c) orow[c] /= sum;
        }
    }
};

// dL/dp for each parameter leaf. The output must be scalar; gradients
// accumulate over every path on the tape.
template <typename T>
std::vector<Tensor<T>> grad(Tape<T>& tape, Var scalar_output, const std::vector<Var>& params) {
    tape.backward(scalar_output);
    std::vector<Tensor<T>> out;
    out.reserve(params.size());
    for (Var p : params) {
        const auto& g = tape.grad(p);
        if (g.data.size() == tape.value(p).data.size())
            out.push_back(g);
        else
            out.push_back(Tensor<T>::zeros(tape.value(p).shape));
    }
    return out;
}

// Plain softmax on values, shared by trace construction and the tests.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    const std::size_t N = logits.rows(), C = logits.shape.size() == 2 ? logits.shape[1] : logits.shape[0];
    Tensor<T> out(logits.shape);
    for (std::size_t n = 0; n < N; ++n) {
        const T* row = logits.data.data() + n * C;
        T* orow = out.data.data() + n * C;
        T mx = row[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        T sum = 0;
        for (std::size_t c = 0; c < C; ++c) {
            orow[c] = std::exp(row[c] - mx);
            sum += orow[c];
        }
        for (std::size_t c = 0; c < C; ++c) orow[c] /= sum;
    }
    return out;
}

} // namespace cascade
