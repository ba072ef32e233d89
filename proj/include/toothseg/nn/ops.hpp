#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "toothseg/nn/autodiff.hpp"
#include "toothseg/nn/rng.hpp"

namespace toothseg::nn {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <typename T>
void check_same_dims(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (!a.same_dims(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + dims_str(a.dims()) +
                                    " vs " + dims_str(b.dims()));
}

}  // namespace detail

inline std::int64_t conv_same_pad(std::int64_t k) {
    if (k % 2 == 0) throw std::invalid_argument("conv3d: kernel size must be odd");
    return k / 2;
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Var<T> constant(TensorT<T> value) {
    return Var<T>(std::move(value), false);
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    detail::check_same_dims(a.value(), b.value(), "add");
    TensorT<T> out = a.value();
    const T* bp = b.value().data();
    T* op = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) op[i] += bp[i];
    auto pa = a.node(), pb = b.node();
    return make_op<T>(std::move(out), {pa, pb}, [pa, pb](Node<T>& self) {
        if (pa->requires_grad) pa->accumulate(self.grad);
        if (pb->requires_grad) pb->accumulate(self.grad);
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    detail::check_same_dims(a.value(), b.value(), "sub");
    TensorT<T> out = a.value();
    const T* bp = b.value().data();
    T* op = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) op[i] -= bp[i];
    auto pa = a.node(), pb = b.node();
    return make_op<T>(std::move(out), {pa, pb}, [pa, pb](Node<T>& self) {
        if (pa->requires_grad) pa->accumulate(self.grad);
        if (pb->requires_grad) {
            TensorT<T>& g = pb->grad_buffer();
            const T* s = self.grad.data();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] -= s[i];
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    detail::check_same_dims(a.value(), b.value(), "mul");
    TensorT<T> out = a.value();
    const T* bp = b.value().data();
    T* op = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) op[i] *= bp[i];
    auto pa = a.node(), pb = b.node();
    return make_op<T>(std::move(out), {pa, pb}, [pa, pb](Node<T>& self) {
        const T* s = self.grad.data();
        if (pa->requires_grad) {
            TensorT<T>& g = pa->grad_buffer();
            const T* bv = pb->value.data();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s[i] * bv[i];
        }
        if (pb->requires_grad) {
            TensorT<T>& g = pb->grad_buffer();
            const T* av = pa->value.data();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s[i] * av[i];
        }
    });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
    detail::check_same_dims(a.value(), b.value(), "div");
    TensorT<T> out = a.value();
    const T* bp = b.value().data();
    T* op = out.data();
    for (std::int64_t i = 0; i < out.numel(); ++i) op[i] /= bp[i];
    auto pa = a.node(), pb = b.node();
    return make_op<T>(std::move(out), {pa, pb}, [pa, pb](Node<T>& self) {
        const T* s = self.grad.data();
        const T* av = pa->value.data();
        const T* bv = pb->value.data();
        if (pa->requires_grad) {
            TensorT<T>& g = pa->grad_buffer();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s[i] / bv[i];
        }
        if (pb->requires_grad) {
            TensorT<T>& g = pb->grad_buffer();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] -= s[i] * av[i] / (bv[i] * bv[i]);
        }
    });
}

template <typename T>
Var<T> add(const Var<T>& a, T c) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += c;
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa](Node<T>& self) { pa->accumulate(self.grad); });
}

template <typename T>
Var<T> mul(const Var<T>& a, T c) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa, c](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s[i] * c;
    });
}

// c - a, elementwise.
template <typename T>
Var<T> rsub(T c, const Var<T>& a) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = c - out[i];
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] -= s[i];
    });
}

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T>
Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T>
Var<T> operator/(const Var<T>& a, const Var<T>& b) { return div(a, b); }
template <typename T>
Var<T> operator*(const Var<T>& a, T c) { return mul(a, c); }
template <typename T>
Var<T> operator*(T c, const Var<T>& a) { return mul(a, c); }
template <typename T>
Var<T> operator+(const Var<T>& a, T c) { return add(a, c); }
template <typename T>
Var<T> operator-(T c, const Var<T>& a) { return rsub(c, a); }
template <typename T>
Var<T> operator-(const Var<T>& a, T c) { return add(a, -c); }

// ---------------------------------------------------------------------------
// Unary maps
// ---------------------------------------------------------------------------

template <typename T>
Var<T> log_v(const Var<T>& a) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        const T* x = pa->value.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s[i] / x[i];
    });
}

template <typename T>
Var<T> pow_c(const Var<T>& a, T e) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::pow(out[i], e);
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa, e](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        const T* x = pa->value.data();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            g[i] += s[i] * e * std::pow(x[i], e - T(1));
    });
}

template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, out[i]));
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa, lo, hi](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        const T* x = pa->value.data();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (x[i] > lo && x[i] < hi) g[i] += s[i];
    });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > T(0) ? out[i] : T(0);
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        const T* x = pa->value.data();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (x[i] > T(0)) g[i] += s[i];
    });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > T(0) ? out[i] : slope * out[i];
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa, slope](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        const T* x = pa->value.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += x[i] > T(0) ? s[i] : slope * s[i];
    });
}

template <typename T>
Var<T> tanh_v(const Var<T>& a) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        const T* y = self.value.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s[i] * (T(1) - y[i] * y[i]);
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
    TensorT<T> out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-out[i]));
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        const T* y = self.value.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s[i] * y[i] * (T(1) - y[i]);
    });
}

// ---------------------------------------------------------------------------
// Reductions and shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum(const Var<T>& a) {
    T acc = 0;
    const T* x = a.value().data();
    for (std::int64_t i = 0; i < a.value().numel(); ++i) acc += x[i];
    auto pa = a.node();
    return make_op<T>(TensorT<T>({1}, std::vector<T>{acc}), {pa}, [pa](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T s = self.grad[0];
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += s;
    });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
    return mul(sum(a), T(1) / static_cast<T>(a.value().numel()));
}

template <typename T>
Var<T> reshape(const Var<T>& a, Dims dims) {
    auto pa = a.node();
    Dims old = a.value().dims();
    return make_op<T>(a.value().reshaped(std::move(dims)), {pa}, [pa, old](Node<T>& self) {
        pa->accumulate(self.grad.reshaped(old));
    });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
    const auto& da = a.value().dims();
    const auto& db = b.value().dims();
    if (da.size() != 5 || db.size() != 5) throw std::invalid_argument("concat_channels: rank-5 only");
    for (std::size_t i = 0; i < 5; ++i)
        if (i != 1 && da[i] != db[i]) throw std::invalid_argument("concat_channels: shape mismatch");
    Dims do_ = da;
    do_[1] = da[1] + db[1];
    TensorT<T> out(do_);
    const std::int64_t vox = da[2] * da[3] * da[4];
    const std::int64_t ca = da[1], cb = db[1];
    for (std::int64_t n = 0; n < da[0]; ++n) {
        std::memcpy(out.data() + (n * (ca + cb)) * vox, a.value().data() + n * ca * vox,
                    sizeof(T) * static_cast<std::size_t>(ca * vox));
        std::memcpy(out.data() + (n * (ca + cb) + ca) * vox, b.value().data() + n * cb * vox,
                    sizeof(T) * static_cast<std::size_t>(cb * vox));
    }
    auto pa = a.node(), pb = b.node();
    return make_op<T>(std::move(out), {pa, pb}, [pa, pb, ca, cb, vox](Node<T>& self) {
        const std::int64_t n_batch = self.value.dim(0);
        if (pa->requires_grad) {
            TensorT<T>& g = pa->grad_buffer();
            for (std::int64_t n = 0; n < n_batch; ++n) {
                const T* src = self.grad.data() + (n * (ca + cb)) * vox;
                T* dst = g.data() + n * ca * vox;
                for (std::int64_t i = 0; i < ca * vox; ++i) dst[i] += src[i];
            }
        }
        if (pb->requires_grad) {
            TensorT<T>& g = pb->grad_buffer();
            for (std::int64_t n = 0; n < n_batch; ++n) {
                const T* src = self.grad.data() + (n * (ca + cb) + ca) * vox;
                T* dst = g.data() + n * cb * vox;
                for (std::int64_t i = 0; i < cb * vox; ++i) dst[i] += src[i];
            }
        }
    });
}

// Extract sample i of the batch as a [1,C,...] tensor.
template <typename T>
Var<T> slice_batch(const Var<T>& a, std::int64_t i) {
    const auto& d = a.value().dims();
    if (d.empty() || i < 0 || i >= d[0]) throw std::invalid_argument("slice_batch: index out of range");
    Dims do_ = d;
    do_[0] = 1;
    const std::int64_t stride = a.value().numel() / d[0];
    TensorT<T> out(do_);
    std::memcpy(out.data(), a.value().data() + i * stride, sizeof(T) * static_cast<std::size_t>(stride));
    auto pa = a.node();
    return make_op<T>(std::move(out), {pa}, [pa, i, stride](Node<T>& self) {
        TensorT<T>& g = pa->grad_buffer();
        const T* s = self.grad.data();
        T* dst = g.data() + i * stride;
        for (std::int64_t k = 0; k < stride; ++k) dst[k] += s[k];
    });
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

// Inverted dropout; identity when not training.
template <typename T>
Var<T> dropout(const Var<T>& a, T rate, Rng& rng, bool training) {
    if (!training || rate <= T(0)) return a;
    if (rate >= T(1)) throw std::invalid_argument("dropout: rate must be < 1");
    const T keep_scale = T(1) / (T(1) - rate);
    TensorT<T> mask(a.value().dims());
    for (std::int64_t i = 0; i < mask.numel(); ++i)
        mask[i] = rng.bernoulli(static_cast<double>(rate)) ? T(0) : keep_scale;
    return mul(a, constant(std::move(mask)));
}

// ---------------------------------------------------------------------------
// 3D convolution, stride 1, 'same' zero padding. x:[N,C,D,H,W],
// w:[F,C,kd,kh,kw], b:[F] (optional, empty tensor to skip).
// Implemented as per-depth-slab im2col + GEMM.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void im2col_slab(const T* x, std::int64_t n, std::int64_t C, std::int64_t D, std::int64_t H,
                 std::int64_t W, std::int64_t kd, std::int64_t kh, std::int64_t kw, std::int64_t d,
                 T* col) {
    const std::int64_t pd = kd / 2, ph = kh / 2, pw = kw / 2;
    const std::int64_t M = H * W;
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t id = 0; id < kd; ++id) {
            const std::int64_t sd = d + id - pd;
            for (std::int64_t ih = 0; ih < kh; ++ih) {
                for (std::int64_t iw = 0; iw < kw; ++iw) {
                    const std::int64_t r = ((c * kd + id) * kh + ih) * kw + iw;
                    T* dst = col + r * M;
                    if (sd < 0 || sd >= D) {
                        std::memset(dst, 0, sizeof(T) * static_cast<std::size_t>(M));
                        continue;
                    }
                    const std::int64_t shift = iw - pw;
                    const std::int64_t lo = std::max<std::int64_t>(0, -shift);
                    const std::int64_t hi = std::min<std::int64_t>(W, W - shift);
                    for (std::int64_t h = 0; h < H; ++h) {
                        const std::int64_t sh = h + ih - ph;
                        T* drow = dst + h * W;
                        if (sh < 0 || sh >= H || lo >= hi) {
                            std::memset(drow, 0, sizeof(T) * static_cast<std::size_t>(W));
                            continue;
                        }
                        const T* src = x + (((n * C + c) * D + sd) * H + sh) * W + shift;
                        if (lo > 0) std::memset(drow, 0, sizeof(T) * static_cast<std::size_t>(lo));
                        std::memcpy(drow + lo, src + lo, sizeof(T) * static_cast<std::size_t>(hi - lo));
                        if (hi < W) std::memset(drow + hi, 0, sizeof(T) * static_cast<std::size_t>(W - hi));
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_slab(const T* col, std::int64_t n, std::int64_t C, std::int64_t D, std::int64_t H,
                 std::int64_t W, std::int64_t kd, std::int64_t kh, std::int64_t kw, std::int64_t d,
                 T* dx) {
    const std::int64_t pd = kd / 2, ph = kh / 2, pw = kw / 2;
    const std::int64_t M = H * W;
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t id = 0; id < kd; ++id) {
            const std::int64_t sd = d + id - pd;
            if (sd < 0 || sd >= D) continue;
            for (std::int64_t ih = 0; ih < kh; ++ih) {
                for (std::int64_t iw = 0; iw < kw; ++iw) {
                    const std::int64_t r = ((c * kd + id) * kh + ih) * kw + iw;
                    const T* src_row = col + r * M;
                    const std::int64_t shift = iw - pw;
                    const std::int64_t lo = std::max<std::int64_t>(0, -shift);
                    const std::int64_t hi = std::min<std::int64_t>(W, W - shift);
                    if (lo >= hi) continue;
                    for (std::int64_t h = 0; h < H; ++h) {
                        const std::int64_t sh = h + ih - ph;
                        if (sh < 0 || sh >= H) continue;
                        T* dst = dx + (((n * C + c) * D + sd) * H + sh) * W + shift;
                        const T* s = src_row + h * W;
                        for (std::int64_t w = lo; w < hi; ++w) dst[w] += s[w];
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const auto& xd = x.value().dims();
    const auto& wd = w.value().dims();
    if (xd.size() != 5 || wd.size() != 5) throw std::invalid_argument("conv3d: rank-5 tensors required");
    if (xd[1] != wd[1])
        throw std::invalid_argument("conv3d: channel mismatch " + dims_str(xd) + " vs " + dims_str(wd));
    const std::int64_t N = xd[0], C = xd[1], D = xd[2], H = xd[3], W = xd[4];
    const std::int64_t F = wd[0], kd = wd[2], kh = wd[3], kw = wd[4];
    conv_same_pad(kd);
    conv_same_pad(kh);
    conv_same_pad(kw);
    const bool has_bias = b.defined() && b.value().numel() > 0;
    if (has_bias && b.value().numel() != F) throw std::invalid_argument("conv3d: bias size mismatch");

    const std::int64_t K = C * kd * kh * kw;
    const std::int64_t M = H * W;
    TensorT<T> out({N, F, D, H, W});
    std::vector<T> col(static_cast<std::size_t>(K * M));
    Eigen::Map<const MatRM<T>> wmat(w.value().data(), F, K);
    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t d = 0; d < D; ++d) {
            detail::im2col_slab(x.value().data(), n, C, D, H, W, kd, kh, kw, d, col.data());
            Eigen::Map<const MatRM<T>> cmat(col.data(), K, M);
            Eigen::Map<MatRM<T>, 0, Eigen::OuterStride<>> omat(
                out.data() + (n * F * D + d) * M, F, M, Eigen::OuterStride<>(D * M));
            omat.noalias() = wmat * cmat;
        }
    }
    if (has_bias) {
        const T* bp = b.value().data();
        T* op = out.data();
        const std::int64_t vox = D * M;
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t f = 0; f < F; ++f) {
                const T bv = bp[f];
                T* row = op + (n * F + f) * vox;
                for (std::int64_t i = 0; i < vox; ++i) row[i] += bv;
            }
    }

    auto px = x.node(), pw_ = w.node();
    auto pb = has_bias ? b.node() : nullptr;
    std::vector<std::shared_ptr<Node<T>>> parents = {px, pw_};
    if (pb) parents.push_back(pb);
    return make_op<T>(
        std::move(out), std::move(parents), [px, pw_, pb, N, C, D, H, W, F, kd, kh, kw, K, M](Node<T>& self) {
            const std::int64_t vox = D * M;
            if (pb && pb->requires_grad) {
                TensorT<T>& gb = pb->grad_buffer();
                const T* s = self.grad.data();
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t f = 0; f < F; ++f) {
                        T acc = 0;
                        const T* row = s + (n * F + f) * vox;
                        for (std::int64_t i = 0; i < vox; ++i) acc += row[i];
                        gb[f] += acc;
                    }
            }
            std::vector<T> col(static_cast<std::size_t>(K * M));
            std::vector<T> dcol;
            Eigen::Map<const MatRM<T>> wmat(pw_->value.data(), F, K);
            const bool need_dw = pw_->requires_grad;
            const bool need_dx = px->requires_grad;
            if (need_dx) dcol.resize(static_cast<std::size_t>(K * M));
            TensorT<T>* gw = need_dw ? &pw_->grad_buffer() : nullptr;
            TensorT<T>* gx = need_dx ? &px->grad_buffer() : nullptr;
            for (std::int64_t n = 0; n < N; ++n) {
                for (std::int64_t d = 0; d < D; ++d) {
                    Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>> gmat(
                        self.grad.data() + (n * F * D + d) * M, F, M, Eigen::OuterStride<>(D * M));
                    if (need_dw || need_dx)
                        detail::im2col_slab(px->value.data(), n, C, D, H, W, kd, kh, kw, d, col.data());
                    if (need_dw) {
                        Eigen::Map<const MatRM<T>> cmat(col.data(), K, M);
                        Eigen::Map<MatRM<T>> gwmat(gw->data(), F, K);
                        gwmat.noalias() += gmat * cmat.transpose();
                    }
                    if (need_dx) {
                        Eigen::Map<MatRM<T>> dcmat(dcol.data(), K, M);
                        dcmat.noalias() = wmat.transpose() * gmat;
                        detail::col2im_slab(dcol.data(), n, C, D, H, W, kd, kh, kw, d, gx->data());
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Average pooling by an integer factor on all three spatial axes.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> avg_pool3d(const Var<T>& x, std::int64_t f) {
    const auto& d = x.value().dims();
    if (d.size() != 5) throw std::invalid_argument("avg_pool3d: rank-5 required");
    if (d[2] % f || d[3] % f || d[4] % f)
        throw std::invalid_argument("avg_pool3d: dims " + dims_str(d) + " not divisible by factor");
    const std::int64_t N = d[0], C = d[1], D = d[2], H = d[3], W = d[4];
    const std::int64_t OD = D / f, OH = H / f, OW = W / f;
    TensorT<T> out({N, C, OD, OH, OW});
    const T inv = T(1) / static_cast<T>(f * f * f);
    const T* xp = x.value().data();
    T* op = out.data();
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
        const T* xin = xp + nc * D * H * W;
        T* o = op + nc * OD * OH * OW;
        for (std::int64_t od = 0; od < OD; ++od)
            for (std::int64_t oh = 0; oh < OH; ++oh)
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    T acc = 0;
                    for (std::int64_t a = 0; a < f; ++a)
                        for (std::int64_t bq = 0; bq < f; ++bq) {
                            const T* row = xin + ((od * f + a) * H + oh * f + bq) * W + ow * f;
                            for (std::int64_t c2 = 0; c2 < f; ++c2) acc += row[c2];
                        }
                    o[(od * OH + oh) * OW + ow] = acc * inv;
                }
    }
    auto px = x.node();
    return make_op<T>(std::move(out), {px}, [px, f, inv](Node<T>& self) {
        TensorT<T>& g = px->grad_buffer();
        const auto& d = px->value.dims();
        const std::int64_t N = d[0], C = d[1], D = d[2], H = d[3], W = d[4];
        const std::int64_t OD = D / f, OH = H / f, OW = W / f;
        const T* s = self.grad.data();
        for (std::int64_t nc = 0; nc < N * C; ++nc) {
            T* gx = g.data() + nc * D * H * W;
            const T* so = s + nc * OD * OH * OW;
            for (std::int64_t od = 0; od < OD; ++od)
                for (std::int64_t oh = 0; oh < OH; ++oh)
                    for (std::int64_t ow = 0; ow < OW; ++ow) {
                        const T gv = so[(od * OH + oh) * OW + ow] * inv;
                        for (std::int64_t a = 0; a < f; ++a)
                            for (std::int64_t bq = 0; bq < f; ++bq) {
                                T* row = gx + ((od * f + a) * H + oh * f + bq) * W + ow * f;
                                for (std::int64_t c2 = 0; c2 < f; ++c2) row[c2] += gv;
                            }
                    }
        }
    });
}

// ---------------------------------------------------------------------------
// Upsampling by an integer factor, separable along each spatial axis.
// Linear (2-tap) or Catmull-Rom cubic (4-tap), voxel-center aligned.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
struct ResampleTaps {
    std::vector<std::int64_t> idx;  // ntaps per output index, clamped
    std::vector<T> w;
    int ntaps = 0;
};

template <typename T>
ResampleTaps<T> upsample_taps(std::int64_t in_len, std::int64_t factor, bool cubic) {
    ResampleTaps<T> taps;
    taps.ntaps = cubic ? 4 : 2;
    const std::int64_t out_len = in_len * factor;
    taps.idx.resize(static_cast<std::size_t>(out_len * taps.ntaps));
    taps.w.resize(static_cast<std::size_t>(out_len * taps.ntaps));
    for (std::int64_t o = 0; o < out_len; ++o) {
        const double s = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
        const std::int64_t i0 = static_cast<std::int64_t>(std::floor(s));
        const double t = s - static_cast<double>(i0);
        double wv[4];
        std::int64_t iv[4];
        if (cubic) {
            const double t2 = t * t, t3 = t2 * t;
            wv[0] = 0.5 * (-t3 + 2 * t2 - t);
            wv[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
            wv[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
            wv[3] = 0.5 * (t3 - t2);
            iv[0] = i0 - 1;
            iv[1] = i0;
            iv[2] = i0 + 1;
            iv[3] = i0 + 2;
        } else {
            wv[0] = 1.0 - t;
            wv[1] = t;
            iv[0] = i0;
            iv[1] = i0 + 1;
        }
        for (int k = 0; k < taps.ntaps; ++k) {
            taps.idx[static_cast<std::size_t>(o * taps.ntaps + k)] =
                std::clamp<std::int64_t>(iv[k], 0, in_len - 1);
            taps.w[static_cast<std::size_t>(o * taps.ntaps + k)] = static_cast<T>(wv[k]);
        }
    }
    return taps;
}

// One separable pass along `axis` (2..4) of a rank-5 tensor.
template <typename T>
TensorT<T> upsample_axis(const TensorT<T>& x, int axis, std::int64_t factor, bool cubic) {
    const auto& d = x.dims();
    const std::int64_t in_len = d[static_cast<std::size_t>(axis)];
    const std::int64_t out_len = in_len * factor;
    Dims od = d;
    od[static_cast<std::size_t>(axis)] = out_len;
    TensorT<T> out(od);
    auto taps = upsample_taps<T>(in_len, factor, cubic);
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= d[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < d.size(); ++i) inner *= d[i];
    const T* xp = x.data();
    T* op = out.data();
    for (std::int64_t u = 0; u < outer; ++u) {
        const T* xin = xp + u * in_len * inner;
        T* o = op + u * out_len * inner;
        for (std::int64_t oi = 0; oi < out_len; ++oi) {
            T* orow = o + oi * inner;
            std::memset(orow, 0, sizeof(T) * static_cast<std::size_t>(inner));
            for (int k = 0; k < taps.ntaps; ++k) {
                const T wv = taps.w[static_cast<std::size_t>(oi * taps.ntaps + k)];
                const T* srow = xin + taps.idx[static_cast<std::size_t>(oi * taps.ntaps + k)] * inner;
                for (std::int64_t i = 0; i < inner; ++i) orow[i] += wv * srow[i];
            }
        }
    }
    return out;
}

// Adjoint of upsample_axis: scatter output-gradient back to input grid.
template <typename T>
TensorT<T> upsample_axis_adjoint(const TensorT<T>& g, int axis, std::int64_t factor, bool cubic) {
    const auto& d = g.dims();
    const std::int64_t out_len = d[static_cast<std::size_t>(axis)];
    const std::int64_t in_len = out_len / factor;
    Dims id_ = d;
    id_[static_cast<std::size_t>(axis)] = in_len;
    TensorT<T> out(id_, T(0));
    auto taps = upsample_taps<T>(in_len, factor, cubic);
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= d[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < d.size(); ++i) inner *= d[i];
    const T* gp = g.data();
    T* op = out.data();
    for (std::int64_t u = 0; u < outer; ++u) {
        const T* gin = gp + u * out_len * inner;
        T* o = op + u * in_len * inner;
        for (std::int64_t oi = 0; oi < out_len; ++oi) {
            const T* grow = gin + oi * inner;
            for (int k = 0; k < taps.ntaps; ++k) {
                const T wv = taps.w[static_cast<std::size_t>(oi * taps.ntaps + k)];
                T* drow = o + taps.idx[static_cast<std::size_t>(oi * taps.ntaps + k)] * inner;
                for (std::int64_t i = 0; i < inner; ++i) drow[i] += wv * grow[i];
            }
        }
    }
    return out;
}

}  // namespace detail

template <typename T>
Var<T> upsample3d(const Var<T>& x, std::int64_t factor, bool cubic) {
    if (x.value().rank() != 5) throw std::invalid_argument("upsample3d: rank-5 required");
    TensorT<T> v = detail::upsample_axis(x.value(), 2, factor, cubic);
    v = detail::upsample_axis(v, 3, factor, cubic);
    v = detail::upsample_axis(v, 4, factor, cubic);
    auto px = x.node();
    return make_op<T>(std::move(v), {px}, [px, factor, cubic](Node<T>& self) {
        TensorT<T> g = detail::upsample_axis_adjoint(self.grad, 4, factor, cubic);
        g = detail::upsample_axis_adjoint(g, 3, factor, cubic);
        g = detail::upsample_axis_adjoint(g, 2, factor, cubic);
        px->accumulate(g);
    });
}

// ---------------------------------------------------------------------------
// Gaussian target stack, differentiable in the per-channel sigma.
// Channel i gets exp(-r^2 / (2 sigma_i^2)) around centers[i] (tensor-order
// coordinates d,h,w), zero outside trunc*sigma, all-zero when invalid.
// ---------------------------------------------------------------------------

struct GaussianTargetSpec {
    std::vector<std::array<double, 3>> centers_dhw;
    std::vector<bool> valid;
    std::int64_t D = 0, H = 0, W = 0;
    double trunc = 6.0;  // support radius in multiples of sigma
};

template <typename T>
Var<T> gaussian_targets(const Var<T>& sigma, const GaussianTargetSpec& spec) {
    const std::int64_t n_ch = sigma.value().numel();
    if (static_cast<std::int64_t>(spec.centers_dhw.size()) != n_ch ||
        static_cast<std::int64_t>(spec.valid.size()) != n_ch)
        throw std::invalid_argument("gaussian_targets: spec size mismatch");
    TensorT<T> out({1, n_ch, spec.D, spec.H, spec.W}, T(0));
    const std::int64_t vox = spec.D * spec.H * spec.W;
    for (std::int64_t i = 0; i < n_ch; ++i) {
        if (!spec.valid[static_cast<std::size_t>(i)]) continue;
        const double sg = static_cast<double>(sigma.value()[i]);
        if (sg <= 0) throw std::invalid_argument("gaussian_targets: sigma must be positive");
        const auto& c = spec.centers_dhw[static_cast<std::size_t>(i)];
        const double rad = spec.trunc * sg;
        const std::int64_t d0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(c[0] - rad)));
        const std::int64_t d1 = std::min<std::int64_t>(spec.D - 1, static_cast<std::int64_t>(std::floor(c[0] + rad)));
        const std::int64_t h0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(c[1] - rad)));
        const std::int64_t h1 = std::min<std::int64_t>(spec.H - 1, static_cast<std::int64_t>(std::floor(c[1] + rad)));
        const std::int64_t w0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(c[2] - rad)));
        const std::int64_t w1 = std::min<std::int64_t>(spec.W - 1, static_cast<std::int64_t>(std::floor(c[2] + rad)));
        const double inv2s2 = 1.0 / (2.0 * sg * sg);
        const double rad2 = rad * rad;
        T* ch = out.data() + i * vox;
        for (std::int64_t d = d0; d <= d1; ++d) {
            const double dz = static_cast<double>(d) - c[0];
            for (std::int64_t h = h0; h <= h1; ++h) {
                const double dy = static_cast<double>(h) - c[1];
                T* row = ch + (d * spec.H + h) * spec.W;
                for (std::int64_t w = w0; w <= w1; ++w) {
                    const double dx = static_cast<double>(w) - c[2];
                    const double r2 = dz * dz + dy * dy + dx * dx;
                    if (r2 <= rad2) row[w] = static_cast<T>(std::exp(-r2 * inv2s2));
                }
            }
        }
    }
    auto ps = sigma.node();
    GaussianTargetSpec sp = spec;
    return make_op<T>(std::move(out), {ps}, [ps, sp, vox](Node<T>& self) {
        // d g / d sigma = g * r^2 / sigma^3
        TensorT<T>& gs = ps->grad_buffer();
        const std::int64_t n_ch = ps->value.numel();
        for (std::int64_t i = 0; i < n_ch; ++i) {
            if (!sp.valid[static_cast<std::size_t>(i)]) continue;
            const double sg = static_cast<double>(ps->value[i]);
            const double inv_s3 = 1.0 / (sg * sg * sg);
            const auto& c = sp.centers_dhw[static_cast<std::size_t>(i)];
            const T* val = self.value.data() + i * vox;
            const T* gout = self.grad.data() + i * vox;
            double acc = 0;
            for (std::int64_t d = 0; d < sp.D; ++d) {
                const double dz = static_cast<double>(d) - c[0];
                for (std::int64_t h = 0; h < sp.H; ++h) {
                    const double dy = static_cast<double>(h) - c[1];
                    const T* vrow = val + (d * sp.H + h) * sp.W;
                    const T* grow = gout + (d * sp.H + h) * sp.W;
                    for (std::int64_t w = 0; w < sp.W; ++w) {
                        if (vrow[w] == T(0)) continue;
                        const double dx = static_cast<double>(w) - c[2];
                        const double r2 = dz * dz + dy * dy + dx * dx;
                        acc += static_cast<double>(grow[w]) * static_cast<double>(vrow[w]) * r2 * inv_s3;
                    }
                }
            }
            gs[i] += static_cast<T>(acc);
        }
    });
}

}  // namespace toothseg::nn
