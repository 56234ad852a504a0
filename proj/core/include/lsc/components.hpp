#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "lsc/volume.hpp"

namespace lsc {

/// Foreground components under 26-connectivity, each a sorted list of linear
/// voxel indices. Ordered by size descending, then by smallest member index.
std::vector<std::vector<std::size_t>> connected_components(const LabelMask& mask);

/// Keeps the `k` largest components; everything else becomes background.
LabelMask keep_largest_components(const LabelMask& mask, std::size_t k);

class InsufficientAnchors : public std::runtime_error {
 public:
  InsufficientAnchors() : std::runtime_error("insufficient anchors") {}
};

struct CanalSplit {
  std::vector<Index3> left;
  std::vector<Index3> right;
};

inline constexpr std::size_t kMinComponentVoxels = 20;

/// The two largest components, assigned left/right by world-x centroid
/// (smaller x is left). Throws InsufficientAnchors unless both have at least
/// `min_size` voxels.
CanalSplit split_components(const LabelMask& mask, std::size_t min_size = kMinComponentVoxels);

Vec3 centroid_world(const GridGeometry& geometry, const std::vector<Index3>& voxels);

}  // namespace lsc
