#pragma once

#include <stdexcept>
#include <string>

#include "toothseg/nn/ops.hpp"

namespace toothseg::losses {

// Shared hyper-parameters of the reweighting losses. alpha weights the
// positive class, beta weights false negatives inside the Tversky index,
// gamma focuses on hard examples, delta mixes BBCE into the combo loss.
struct LossParams {
    double alpha = 0.9;
    double beta = 0.9;
    double gamma = 2.0;
    double delta = 0.5;
    double epsilon = 1e-6;
    double prob_clamp = 1e-7;

    void validate() const {
        if (alpha < 0 || alpha > 1) throw std::invalid_argument("LossParams: alpha must be in [0,1]");
        if (delta < 0 || delta > 1) throw std::invalid_argument("LossParams: delta must be in [0,1]");
        if (beta <= 0 || beta >= 1) throw std::invalid_argument("LossParams: beta must be in (0,1)");
        if (gamma <= 0) throw std::invalid_argument("LossParams: gamma must be > 0");
        if (epsilon <= 0) throw std::invalid_argument("LossParams: epsilon must be > 0");
        if (prob_clamp <= 0 || prob_clamp >= 0.5)
            throw std::invalid_argument("LossParams: prob_clamp must be in (0,0.5)");
    }
};

enum class LossKind { Focal, FocalTversky, Combo };

inline LossKind parse_loss_name(const std::string& name) {
    if (name == "focal") return LossKind::Focal;
    if (name == "focal_tversky") return LossKind::FocalTversky;
    if (name == "combo") return LossKind::Combo;
    throw std::invalid_argument("unknown loss '" + name + "' (expected focal|focal_tversky|combo)");
}

inline const char* loss_name(LossKind k) {
    switch (k) {
        case LossKind::Focal: return "focal";
        case LossKind::FocalTversky: return "focal_tversky";
        case LossKind::Combo: return "combo";
    }
    return "?";
}

namespace detail {

template <typename T>
void check_shapes(const nn::Var<T>& p, const nn::TensorT<T>& y, const char* op) {
    if (!p.value().same_dims(y))
        throw std::invalid_argument(std::string(op) + ": probability/target shape mismatch");
}

template <typename T>
nn::TensorT<T> one_minus(const nn::TensorT<T>& y) {
    nn::TensorT<T> out = y;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = T(1) - out[i];
    return out;
}

}  // namespace detail

// Mean over voxels of -alpha_t (1-p_t)^gamma log(p_t), with
// p_t = p where y=1 else 1-p and alpha_t = alpha where y=1 else 1-alpha.
// Targets may be smoothed labels in [0,1]; the convex forms above apply.
template <typename T>
nn::Var<T> focal_loss(const nn::Var<T>& p, const nn::TensorT<T>& y, T alpha, T gamma,
                      T prob_clamp = T(1e-7)) {
    detail::check_shapes(p, y, "focal_loss");
    auto pc = nn::clamp(p, prob_clamp, T(1) - prob_clamp);
    auto yc = nn::constant(y);
    auto ym = nn::constant(detail::one_minus(y));
    auto pt = pc * yc + (T(1) - pc) * ym;
    nn::TensorT<T> at = y;
    for (std::int64_t i = 0; i < at.numel(); ++i) at[i] = alpha * y[i] + (T(1) - alpha) * (T(1) - y[i]);
    auto focal = nn::pow_c(T(1) - pt, gamma) * nn::log_v(pt) * nn::constant(std::move(at));
    return nn::mean(focal) * T(-1);
}

// Soft Tversky index (|PG|+e) / (|PG| + beta|P\G| + (1-beta)|G\P| + e) with
// |PG| = sum p*g, |P\G| = sum p*(1-g), |G\P| = sum (1-p)*g.
template <typename T>
nn::Var<T> tversky_index(const nn::Var<T>& p, const nn::TensorT<T>& g, T beta, T epsilon) {
    detail::check_shapes(p, g, "tversky_index");
    auto gc = nn::constant(g);
    auto gm = nn::constant(detail::one_minus(g));
    auto pg = nn::sum(p * gc);
    auto p_not_g = nn::sum(p * gm);
    auto g_not_p = nn::sum((T(1) - p) * gc);
    auto denom = pg + p_not_g * beta + g_not_p * (T(1) - beta) + epsilon;
    return (pg + epsilon) / denom;
}

// (1 - TI)^(1/gamma); gamma = 1 recovers 1 - TI exactly.
template <typename T>
nn::Var<T> focal_tversky_loss(const nn::Var<T>& p, const nn::TensorT<T>& g, T beta, T gamma,
                              T epsilon) {
    auto ti = tversky_index(p, g, beta, epsilon);
    return nn::pow_c(T(1) - ti, T(1) / gamma);
}

// Mean of -alpha y log p - (1-alpha)(1-y) log(1-p).
template <typename T>
nn::Var<T> balanced_bce(const nn::Var<T>& p, const nn::TensorT<T>& y, T alpha,
                        T prob_clamp = T(1e-7)) {
    detail::check_shapes(p, y, "balanced_bce");
    auto pc = nn::clamp(p, prob_clamp, T(1) - prob_clamp);
    nn::TensorT<T> wy = y;
    nn::TensorT<T> wm = y;
    for (std::int64_t i = 0; i < y.numel(); ++i) {
        wy[i] = alpha * y[i];
        wm[i] = (T(1) - alpha) * (T(1) - y[i]);
    }
    auto term = nn::log_v(pc) * nn::constant(std::move(wy)) +
                nn::log_v(T(1) - pc) * nn::constant(std::move(wm));
    return nn::mean(term) * T(-1);
}

// (2 sum(p y) + e) / (sum p + sum y + e).
template <typename T>
nn::Var<T> soft_dice(const nn::Var<T>& p, const nn::TensorT<T>& y, T epsilon) {
    detail::check_shapes(p, y, "soft_dice");
    auto inter = nn::sum(p * nn::constant(y));
    T ysum = 0;
    for (std::int64_t i = 0; i < y.numel(); ++i) ysum += y[i];
    auto denom = nn::sum(p) + ysum + epsilon;
    return (inter * T(2) + epsilon) / denom;
}

// delta * BBCE - (1-delta) * soft Dice; the Dice term is subtracted as
// printed, so a perfect prediction scores -(1-delta), not 0.
template <typename T>
nn::Var<T> combo_loss(const nn::Var<T>& p, const nn::TensorT<T>& y, T alpha, T delta, T epsilon,
                      T prob_clamp = T(1e-7)) {
    auto bbce = balanced_bce(p, y, alpha, prob_clamp);
    auto dice = soft_dice(p, y, epsilon);
    return bbce * delta - dice * (T(1) - delta);
}

// Dispatch by loss kind with shared parameters.
template <typename T>
nn::Var<T> evaluate_loss(LossKind kind, const nn::Var<T>& p, const nn::TensorT<T>& y,
                         const LossParams& lp) {
    switch (kind) {
        case LossKind::Focal:
            return focal_loss(p, y, static_cast<T>(lp.alpha), static_cast<T>(lp.gamma),
                              static_cast<T>(lp.prob_clamp));
        case LossKind::FocalTversky:
            return focal_tversky_loss(p, y, static_cast<T>(lp.beta), static_cast<T>(lp.gamma),
                                      static_cast<T>(lp.epsilon));
        case LossKind::Combo:
            return combo_loss(p, y, static_cast<T>(lp.alpha), static_cast<T>(lp.delta),
                              static_cast<T>(lp.epsilon), static_cast<T>(lp.prob_clamp));
    }
    throw std::logic_error("unreachable loss kind");
}

// Plain-number conveniences for evaluation code and tests.
template <typename T>
T focal_loss_value(const nn::TensorT<T>& p, const nn::TensorT<T>& y, T alpha, T gamma,
                   T prob_clamp = T(1e-7)) {
    return focal_loss(nn::constant(p), y, alpha, gamma, prob_clamp).value()[0];
}
template <typename T>
T tversky_index_value(const nn::TensorT<T>& p, const nn::TensorT<T>& g, T beta, T epsilon) {
    return tversky_index(nn::constant(p), g, beta, epsilon).value()[0];
}
template <typename T>
T focal_tversky_loss_value(const nn::TensorT<T>& p, const nn::TensorT<T>& g, T beta, T gamma,
                           T epsilon) {
    return focal_tversky_loss(nn::constant(p), g, beta, gamma, epsilon).value()[0];
}
template <typename T>
T balanced_bce_value(const nn::TensorT<T>& p, const nn::TensorT<T>& y, T alpha,
                     T prob_clamp = T(1e-7)) {
    return balanced_bce(nn::constant(p), y, alpha, prob_clamp).value()[0];
}
template <typename T>
T soft_dice_value(const nn::TensorT<T>& p, const nn::TensorT<T>& y, T epsilon) {
    return soft_dice(nn::constant(p), y, epsilon).value()[0];
}
template <typename T>
T combo_loss_value(const nn::TensorT<T>& p, const nn::TensorT<T>& y, T alpha, T delta, T epsilon,
                   T prob_clamp = T(1e-7)) {
    return combo_loss(nn::constant(p), y, alpha, delta, epsilon, prob_clamp).value()[0];
}

}  // namespace toothseg::losses
