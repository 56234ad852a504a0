#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "lsc/geometry.hpp"

namespace lsc {

/// Voxel counts per axis.
struct Dims {
  std::uint32_t nx = 1;
  std::uint32_t ny = 1;
  std::uint32_t nz = 1;

  std::size_t count() const { return std::size_t{nx} * ny * nz; }
  std::uint32_t operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Grid placement shared by volumes and masks. Spacing and origin are stored
/// as 32-bit floats so that the on-disk form is exact.
struct GridGeometry {
  Dims dims;
  std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
  std::array<float, 3> origin{0.0f, 0.0f, 0.0f};

  /// Throws std::invalid_argument when dims are zero or spacing is not finite and positive.
  void validate() const;

  std::size_t linear(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::size_t>(x + static_cast<std::int64_t>(dims.nx) *
                                            (y + static_cast<std::int64_t>(dims.ny) * z));
  }
  Index3 index_of(std::size_t linear_index) const;
  bool contains(const Index3& p) const;

  /// origin + (px*sx, py*sy, pz*sz)
  Vec3 world(const Vec3& index) const;
  Vec3 world(const Index3& p) const { return world(Vec3(double(p.x), double(p.y), double(p.z))); }
  /// Continuous index of a world point.
  Vec3 index(const Vec3& world_mm) const;

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Dense 3D grid, x fastest then y then z.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(GridGeometry geometry, std::vector<T> values);
  Grid(GridGeometry geometry, T fill);

  const GridGeometry& geometry() const { return geometry_; }
  const Dims& dims() const { return geometry_.dims; }
  std::size_t size() const { return values_.size(); }

  std::span<const T> values() const { return values_; }
  const T& at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return values_[geometry_.linear(x, y, z)];
  }
  const T& operator[](std::size_t i) const { return values_[i]; }

  /// Moves the storage out; the grid is left empty.
  std::vector<T> release() && { return std::move(values_); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  GridGeometry geometry_;
  std::vector<T> values_;
};

/// CT intensities.
using Volume = Grid<float>;

/// Binary voxel labels: 0 background, 1 canal foreground.
class LabelMask : public Grid<std::uint8_t> {
 public:
  LabelMask() = default;
  /// Throws std::invalid_argument for label values outside {0, 1}.
  LabelMask(GridGeometry geometry, std::vector<std::uint8_t> labels);

  std::size_t foreground_count() const;
};

inline constexpr int kCuboidSide = 48;

/// 48^3 window of a parent grid together with its index offset.
template <class T>
struct Cuboid {
  Index3 offset;
  std::vector<T> values;  // kCuboidSide^3, x fastest

  const T& at(int x, int y, int z) const {
    return values[static_cast<std::size_t>(x + kCuboidSide * (y + kCuboidSide * z))];
  }
};

/// Throws std::out_of_range when offset + 48 exceeds the parent on any axis.
template <class T>
Cuboid<T> extract_cuboid(const Grid<T>& grid, const Index3& offset);

/// Clamps to [lo, hi] and maps affinely onto [0, 1]. Throws std::invalid_argument if lo >= hi.
Volume normalize_intensity(const Volume& vol, float lo = -1000.0f, float hi = 3000.0f);

float min_value(const Volume& vol);

}  // namespace lsc
