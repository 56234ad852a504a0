#pragma once

#include <cstdint>

#include "lsc/geometry.hpp"
#include "lsc/volume.hpp"

namespace lsc {

/// Trilinear sample at a continuous voxel index; `fill` outside the grid.
float sample_trilinear(const Volume& vol, const Vec3& index, float fill);

/// Nearest-neighbour label at a continuous voxel index; 0 outside the grid.
std::uint8_t sample_nearest(const LabelMask& mask, const Vec3& index);

/// Label from the trilinearly interpolated indicator, 1 where it reaches 0.5; 0 outside the grid.
std::uint8_t sample_linear_label(const LabelMask& mask, const Vec3& index);

enum class MaskInterpolation { Nearest, Linear };

/// Output lattice for resampling `input` through `world_to_calibrated`.
///
/// The lattice is axis-aligned in calibrated coordinates with isotropic
/// `spacing`, covers the transformed bounding box of the input plus `pad`
/// voxels per side, and places voxel centers at (k + 1/2) * spacing. The x
/// extent is symmetric about 0, so the plane x = 0 lies between the two middle
/// columns and maps onto itself under reflection of the x index.
GridGeometry calibrated_grid(const GridGeometry& input, const RigidPose& world_to_calibrated,
                             double spacing, int pad = 2);

/// Resamples into calibrated coordinates. Out-of-field voxels take the input minimum.
Volume resample(const Volume& vol, const RigidPose& world_to_calibrated, double spacing = 0.5,
                int workers = 1);

/// Mask variant, nearest neighbour by default; out-of-field voxels are background.
LabelMask resample(const LabelMask& mask, const RigidPose& world_to_calibrated,
                   double spacing = 0.5, int workers = 1,
                   MaskInterpolation interpolation = MaskInterpolation::Nearest);

}  // namespace lsc
