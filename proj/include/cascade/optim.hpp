#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cascade/net.hpp"

namespace cascade {

// SGD with Nesterov momentum. L2 weight decay is added to the gradient (not
// the loss) and only for parameters flagged for decay; norm scale/offset and
// biases are exempt.
//   g = grad + wd*p
//   v = mu*v + g
//   p = p - lr*(g + mu*v)
template <typename T>
class SgdNesterov {
public:
    SgdNesterov(T momentum, T weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(Network<T>& net, const std::vector<Tensor<T>>& grads, T lr) {
        if (grads.size() != net.params.size()) throw std::invalid_argument("sgd: grad/param count mismatch");
        if (velocity_.empty())
            for (const auto& p : net.params) velocity_.push_back(Tensor<T>::zeros(p.value.shape));
        for (std::size_t i = 0; i < net.params.size(); ++i) {
            auto& p = net.params[i].value;
            auto& v = velocity_[i];
            const T wd = net.params[i].decay ? weight_decay_ : T(0);
            for (std::size_t j = 0; j < p.size(); ++j) {
                const T g = grads[i].data[j] + wd * p.data[j];
                v.data[j] = momentum_ * v.data[j] + g;
                p.data[j] -= lr * (g + momentum_ * v.data[j]);
            }
        }
    }

private:
    T momentum_, weight_decay_;
    std::vector<Tensor<T>> velocity_;
};

// Step-decay schedule: lr0 * factor^floor(epoch / interval).
inline double lr_schedule(std::size_t epoch, double lr0, double factor, std::size_t interval) {
    if (interval == 0) return lr0;
    return lr0 * std::pow(factor, double(epoch / interval));
}

// Adam with additive L2 decay, used by the trace classifier.
template <typename T>
class Adam {
public:
    Adam(T lr, T weight_decay, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.push_back(Tensor<T>::zeros(p.shape));
                v_.push_back(Tensor<T>::zeros(p.shape));
            }
        }
        ++t_;
        const T bc1 = T(1) - std::pow(beta1_, T(t_));
        const T bc2 = T(1) - std::pow(beta2_, T(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (std::size_t j = 0; j < params[i].size(); ++j) {
                const T g = grads[i].data[j] + wd_ * params[i].data[j];
                m_[i].data[j] = beta1_ * m_[i].data[j] + (T(1) - beta1_) * g;
                v_[i].data[j] = beta2_ * v_[i].data[j] + (T(1) - beta2_) * g * g;
                const T mhat = m_[i].data[j] / bc1;
                const T vhat = v_[i].data[j] / bc2;
                params[i].data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    T lr_, wd_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

} // namespace cascade
