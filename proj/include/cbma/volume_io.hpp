#pragma once

#include <filesystem>
#include <variant>

#include "cbma/volume.hpp"

namespace cbma {

/// A volume read from disk; the element type follows the file.
using AnyVolume = std::variant<MaskGrid, RealGrid>;

// VGRID1: one ASCII header line
//   "VGRID1 nx ny nz sx sy sz ox oy oz dtype\n"
// followed by nx*ny*nz little-endian elements (dtype u8 or f64), x fastest.
void write_vgrid(const std::filesystem::path& path, const MaskGrid& grid);
void write_vgrid(const std::filesystem::path& path, const RealGrid& grid);
AnyVolume read_vgrid(const std::filesystem::path& path);

// Single-file NIfTI-1 (.nii). u8 and f64 are written natively; reading also
// accepts int16/int32/float32 (converted to f64, scl_slope/inter applied).
// Only axis-aligned affines with positive voxel steps are supported.
void write_nifti(const std::filesystem::path& path, const MaskGrid& grid);
void write_nifti(const std::filesystem::path& path, const RealGrid& grid);
AnyVolume read_nifti(const std::filesystem::path& path);

/// Dispatch on extension: ".nii" is NIfTI-1, anything else VGRID1.
AnyVolume read_volume(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const AnyVolume& volume);

/// Any nonzero voxel of the file is in the mask.
BrainMask load_mask(const std::filesystem::path& path);

}  // namespace cbma
