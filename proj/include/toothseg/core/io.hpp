#pragma once

#include <string>

#include "toothseg/core/volume.hpp"

namespace toothseg {

// Volume IO. Format is chosen by extension:
//   .mha          MetaImage, header and raw data in one file
//   .mhd          MetaImage header + sibling .raw data file
//   .f32raw       raw little-endian float32 + "<path>.json" sidecar
//                 {"shape":[nx,ny,nz],"spacing":[sx,sy,sz],"origin":[ox,oy,oz]}
// Intensities are float32 throughout; MetaImage readers additionally accept
// MET_UCHAR/MET_SHORT/MET_USHORT/MET_DOUBLE and convert.
Volume3D load_volume(const std::string& path);
void save_volume(const Volume3D& volume, const std::string& path);

}  // namespace toothseg
