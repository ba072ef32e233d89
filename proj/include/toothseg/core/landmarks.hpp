#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toothseg/core/types.hpp"

namespace toothseg {

inline constexpr int kToothCount = 32;
inline constexpr Vec3d kMissingLandmark = {-1.0, -1.0, -1.0};

// Per-tooth 3D coordinates in voxel units of a stated reference shape.
// A slot is either missing (the (-1,-1,-1) sentinel) or inside
// [0, reference_shape). Indexing by tooth slot is stable under IO.
class LandmarkSet {
public:
    LandmarkSet() : LandmarkSet(kToothCount, {1, 1, 1}) {}
    LandmarkSet(int count, Index3 reference_shape)
        : coords_(static_cast<std::size_t>(count), kMissingLandmark), reference_shape_(reference_shape) {}

    int count() const { return static_cast<int>(coords_.size()); }
    const Index3& reference_shape() const { return reference_shape_; }
    void set_reference_shape(Index3 s) { reference_shape_ = s; }

    const Vec3d& coord(int i) const { return coords_.at(static_cast<std::size_t>(i)); }
    void set_coord(int i, const Vec3d& c);
    void set_missing(int i) { coords_.at(static_cast<std::size_t>(i)) = kMissingLandmark; }
    bool is_missing(int i) const { return coords_.at(static_cast<std::size_t>(i)) == kMissingLandmark; }

    int present_count() const {
        int n = 0;
        for (int i = 0; i < count(); ++i) n += !is_missing(i);
        return n;
    }

    // Rebind the reference shape, revalidating every present coordinate.
    LandmarkSet with_reference_shape(Index3 shape) const {
        LandmarkSet out(count(), shape);
        for (int i = 0; i < count(); ++i)
            if (!is_missing(i)) out.set_coord(i, coord(i));
        return out;
    }

    bool same_coords(const LandmarkSet& o) const { return coords_ == o.coords_; }
    bool operator==(const LandmarkSet& o) const {
        return coords_ == o.coords_ && reference_shape_ == o.reference_shape_;
    }

private:
    std::vector<Vec3d> coords_;
    Index3 reference_shape_ = {1, 1, 1};
};

// CSV of `tooth_index,x,y,z` lines, tooth_index ascending from 0, missing
// slots written as the sentinel. expected_count < 0 infers the count from
// the file; otherwise a mismatch is an error.
LandmarkSet load_landmarks(const std::string& path, int expected_count = kToothCount);
void save_landmarks(const LandmarkSet& lms, const std::string& path);

}  // namespace toothseg
