#pragma once

// Central finite-difference gradient oracle. Deliberately knows nothing about
// the autodiff engine: it only re-evaluates a scalar function at perturbed
// inputs, so it stays an independent check of analytic gradients.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace gradcheck {

using ScalarFn = std::function<double(const std::vector<double>&)>;

inline std::vector<double> central_differences(const ScalarFn& f, std::vector<double> x,
                                               double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline std::vector<double> central_differences_subset(const ScalarFn& f, std::vector<double> x,
                                                      const std::vector<std::size_t>& indices,
                                                      double h = 1e-5) {
    std::vector<double> g(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Worst per-component error, relative with an absolute floor of 1:
// |a-b| / max(1, |a|, |b|).
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace gradcheck
