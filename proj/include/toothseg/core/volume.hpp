#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "toothseg/core/types.hpp"

namespace toothseg {

// 3D scalar grid with physical voxel spacing. Voxel (x,y,z) covers the
// physical point origin + (x*sx, y*sy, z*sz); coordinates refer to voxel
// centers, so integer coordinate x is the center of voxel x. Data is stored
// x-fastest: index = x + nx*(y + ny*z).
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Index3 shape, Vec3d spacing, Vec3d origin = {0, 0, 0}, float fill = 0.0f)
        : shape_(shape), spacing_(spacing), origin_(origin) {
        validate_geometry();
        data_.assign(static_cast<std::size_t>(numel()), fill);
    }
    Volume3D(Index3 shape, Vec3d spacing, Vec3d origin, std::vector<float> data)
        : shape_(shape), spacing_(spacing), origin_(origin), data_(std::move(data)) {
        validate_geometry();
        if (static_cast<std::int64_t>(data_.size()) != numel())
            throw std::invalid_argument("Volume3D: data length does not match shape");
    }

    const Index3& shape() const { return shape_; }
    const Vec3d& spacing() const { return spacing_; }
    const Vec3d& origin() const { return origin_; }
    std::int64_t nx() const { return shape_[0]; }
    std::int64_t ny() const { return shape_[1]; }
    std::int64_t nz() const { return shape_[2]; }
    std::int64_t numel() const { return shape_[0] * shape_[1] * shape_[2]; }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    std::int64_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x + shape_[0] * (y + shape_[1] * z);
    }
    float& at(std::int64_t x, std::int64_t y, std::int64_t z) { return data_[static_cast<std::size_t>(index(x, y, z))]; }
    float at(std::int64_t x, std::int64_t y, std::int64_t z) const { return data_[static_cast<std::size_t>(index(x, y, z))]; }
    bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x >= 0 && x < shape_[0] && y >= 0 && y < shape_[1] && z >= 0 && z < shape_[2];
    }

    float min_value() const {
        float m = data_.empty() ? 0.0f : data_[0];
        for (float v : data_) m = v < m ? v : m;
        return m;
    }
    float max_value() const {
        float m = data_.empty() ? 0.0f : data_[0];
        for (float v : data_) m = v > m ? v : m;
        return m;
    }

private:
    void validate_geometry() const {
        for (int i = 0; i < 3; ++i) {
            if (shape_[i] < 1) throw std::invalid_argument("Volume3D: shape components must be >= 1");
            if (!(spacing_[i] > 0)) throw std::invalid_argument("Volume3D: spacing components must be > 0");
        }
    }

    Index3 shape_ = {1, 1, 1};
    Vec3d spacing_ = {1, 1, 1};
    Vec3d origin_ = {0, 0, 0};
    std::vector<float> data_ = {0.0f};
};

// Binary {0,1} volume.
class SegMask {
public:
    SegMask() = default;
    explicit SegMask(Volume3D vol) : vol_(std::move(vol)) {
        for (float v : vol_.data())
            if (v != 0.0f && v != 1.0f)
                throw std::invalid_argument("SegMask: values must be exactly 0 or 1");
    }
    static SegMask zeros(Index3 shape, Vec3d spacing, Vec3d origin = {0, 0, 0}) {
        return SegMask(Volume3D(shape, spacing, origin, 0.0f));
    }

    const Volume3D& volume() const { return vol_; }
    Volume3D& volume_unchecked() { return vol_; }

    std::int64_t count() const {
        std::int64_t n = 0;
        for (float v : vol_.data()) n += v != 0.0f;
        return n;
    }
    bool empty_mask() const { return count() == 0; }
    bool get(std::int64_t x, std::int64_t y, std::int64_t z) const { return vol_.at(x, y, z) != 0.0f; }
    void set(std::int64_t x, std::int64_t y, std::int64_t z, bool v) { vol_.at(x, y, z) = v ? 1.0f : 0.0f; }

private:
    Volume3D vol_{{1, 1, 1}, {1, 1, 1}};
};

}  // namespace toothseg
