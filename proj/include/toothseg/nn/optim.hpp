#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "toothseg/nn/autodiff.hpp"

namespace toothseg::nn {

// Named trainable parameter.
template <typename T>
struct Param {
    std::string name;
    Var<T> var;
};

template <typename T>
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::vector<Param<T>>& params) = 0;
    void zero_grad(std::vector<Param<T>>& params) {
        for (auto& p : params) p.var.zero_grad();
    }
};

// Nesterov accelerated gradient, TensorFlow-style update:
//   v <- mu*v - lr*g;  theta <- theta + mu*v - lr*g
template <typename T>
class NesterovSgd : public Optimizer<T> {
public:
    NesterovSgd(T lr, T momentum) : lr_(lr), mu_(momentum) {}

    void step(std::vector<Param<T>>& params) override {
        if (velocity_.empty()) {
            for (auto& p : params) velocity_.emplace_back(p.var.value().dims(), T(0));
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (!p.var.has_grad()) continue;
            TensorT<T>& v = velocity_[i];
            TensorT<T>& x = p.var.value();
            const TensorT<T>& g = p.var.grad();
            for (std::int64_t k = 0; k < x.numel(); ++k) {
                v[k] = mu_ * v[k] - lr_ * g[k];
                x[k] += mu_ * v[k] - lr_ * g[k];
            }
        }
    }

private:
    T lr_, mu_;
    std::vector<TensorT<T>> velocity_;
};

template <typename T>
class Adam : public Optimizer<T> {
public:
    explicit Adam(T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(std::vector<Param<T>>& params) override {
        if (m_.empty()) {
            for (auto& p : params) {
                m_.emplace_back(p.var.value().dims(), T(0));
                v_.emplace_back(p.var.value().dims(), T(0));
            }
        }
        ++t_;
        const T bc1 = T(1) - std::pow(b1_, static_cast<T>(t_));
        const T bc2 = T(1) - std::pow(b2_, static_cast<T>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (!p.var.has_grad()) continue;
            TensorT<T>& x = p.var.value();
            const TensorT<T>& g = p.var.grad();
            for (std::int64_t k = 0; k < x.numel(); ++k) {
                m_[i][k] = b1_ * m_[i][k] + (T(1) - b1_) * g[k];
                v_[i][k] = b2_ * v_[i][k] + (T(1) - b2_) * g[k] * g[k];
                const T mhat = m_[i][k] / bc1;
                const T vhat = v_[i][k] / bc2;
                x[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    T lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<TensorT<T>> m_, v_;
};

}  // namespace toothseg::nn
