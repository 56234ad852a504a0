#include "lsc/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lsc {

void GridGeometry::validate() const {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
    throw std::invalid_argument("grid dims must all be >= 1");
  }
  for (float s : spacing) {
    if (!std::isfinite(s) || s <= 0.0f) {
      throw std::invalid_argument("grid spacing must be finite and > 0");
    }
  }
  for (float o : origin) {
    if (!std::isfinite(o)) throw std::invalid_argument("grid origin must be finite");
  }
}

Index3 GridGeometry::index_of(std::size_t linear_index) const {
  const auto i = static_cast<std::int64_t>(linear_index);
  const std::int64_t nx = dims.nx, ny = dims.ny;
  return {i % nx, (i / nx) % ny, i / (nx * ny)};
}

bool GridGeometry::contains(const Index3& p) const {
  return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x < std::int64_t{dims.nx} &&
         p.y < std::int64_t{dims.ny} && p.z < std::int64_t{dims.nz};
}

Vec3 GridGeometry::world(const Vec3& index) const {
  return {double(origin[0]) + index.x() * double(spacing[0]),
          double(origin[1]) + index.y() * double(spacing[1]),
          double(origin[2]) + index.z() * double(spacing[2])};
}

Vec3 GridGeometry::index(const Vec3& w) const {
  return {(w.x() - double(origin[0])) / double(spacing[0]),
          (w.y() - double(origin[1])) / double(spacing[1]),
          (w.z() - double(origin[2])) / double(spacing[2])};
}

template <class T>
Grid<T>::Grid(GridGeometry geometry, std::vector<T> values)
    : geometry_(geometry), values_(std::move(values)) {
  geometry_.validate();
  if (values_.size() != geometry_.dims.count()) {
    throw std::invalid_argument("voxel count " + std::to_string(values_.size()) +
                                " does not match dims product " +
                                std::to_string(geometry_.dims.count()));
  }
}

template <class T>
Grid<T>::Grid(GridGeometry geometry, T fill) : geometry_(geometry) {
  geometry_.validate();
  values_.assign(geometry_.dims.count(), fill);
}

template class Grid<float>;
template class Grid<std::uint8_t>;

LabelMask::LabelMask(GridGeometry geometry, std::vector<std::uint8_t> labels)
    : Grid<std::uint8_t>(geometry, std::move(labels)) {
  for (std::uint8_t v : values()) {
    if (v > 1) throw std::invalid_argument("label values must be 0 or 1");
  }
}

std::size_t LabelMask::foreground_count() const {
  return static_cast<std::size_t>(std::count(values().begin(), values().end(), std::uint8_t{1}));
}

template <class T>
Cuboid<T> extract_cuboid(const Grid<T>& grid, const Index3& offset) {
  const Dims& d = grid.dims();
  const std::array<std::int64_t, 3> off{offset.x, offset.y, offset.z};
  for (int a = 0; a < 3; ++a) {
    if (off[a] < 0 || off[a] + kCuboidSide > std::int64_t{d[a]}) {
      throw std::out_of_range("cuboid offset out of bounds on axis " + std::to_string(a));
    }
  }
  Cuboid<T> out;
  out.offset = offset;
  out.values.resize(std::size_t{kCuboidSide} * kCuboidSide * kCuboidSide);
  auto dst = out.values.begin();
  for (int z = 0; z < kCuboidSide; ++z) {
    for (int y = 0; y < kCuboidSide; ++y) {
      const T* row = &grid.at(offset.x, offset.y + y, offset.z + z);
      dst = std::copy(row, row + kCuboidSide, dst);
    }
  }
  return out;
}

template Cuboid<float> extract_cuboid(const Grid<float>&, const Index3&);
template Cuboid<std::uint8_t> extract_cuboid(const Grid<std::uint8_t>&, const Index3&);

Volume normalize_intensity(const Volume& vol, float lo, float hi) {
  if (!(lo < hi)) throw std::invalid_argument("normalization window requires lo < hi");
  std::vector<float> out(vol.size());
  const float width = hi - lo;
  std::transform(vol.values().begin(), vol.values().end(), out.begin(),
                 [&](float v) { return (std::clamp(v, lo, hi) - lo) / width; });
  return {vol.geometry(), std::move(out)};
}

float min_value(const Volume& vol) {
  if (vol.size() == 0) return 0.0f;
  return *std::min_element(vol.values().begin(), vol.values().end());
}

}  // namespace lsc
