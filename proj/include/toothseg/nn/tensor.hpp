#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace toothseg::nn {

using Dims = std::vector<std::int64_t>;

inline std::int64_t dims_numel(const Dims& d) {
    std::int64_t n = 1;
    for (auto v : d) n *= v;
    return n;
}

inline std::string dims_str(const Dims& d) {
    std::string s = "[";
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(d[i]);
    }
    return s + "]";
}

// Dense row-major tensor with value semantics.
template <typename T>
class TensorT {
public:
    TensorT() = default;
    explicit TensorT(Dims dims, T fill = T(0))
        : dims_(std::move(dims)), data_(static_cast<std::size_t>(dims_numel(dims_)), fill) {}
    TensorT(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != dims_numel(dims_))
            throw std::invalid_argument("tensor data size does not match dims " + dims_str(dims_));
    }

    const Dims& dims() const { return dims_; }
    std::int64_t dim(std::size_t i) const { return dims_.at(i); }
    std::size_t rank() const { return dims_.size(); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    template <typename... Ix>
    T& at(Ix... ix) {
        return data_[flat(ix...)];
    }
    template <typename... Ix>
    const T& at(Ix... ix) const {
        return data_[flat(ix...)];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    TensorT reshaped(Dims new_dims) const {
        if (dims_numel(new_dims) != numel())
            throw std::invalid_argument("reshape numel mismatch");
        TensorT out;
        out.dims_ = std::move(new_dims);
        out.data_ = data_;
        return out;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(dims_);
        for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool same_dims(const TensorT& o) const { return dims_ == o.dims_; }

private:
    template <typename... Ix>
    std::size_t flat(Ix... ix) const {
        const std::int64_t idx[] = {static_cast<std::int64_t>(ix)...};
        const std::size_t n = sizeof...(Ix);
        std::size_t off = 0;
        for (std::size_t i = 0; i < n; ++i) off = off * static_cast<std::size_t>(dims_[i]) + static_cast<std::size_t>(idx[i]);
        return off;
    }

    Dims dims_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace toothseg::nn
