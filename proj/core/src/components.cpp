#include "lsc/components.hpp"

#include <algorithm>

namespace lsc {

std::vector<std::vector<std::size_t>> connected_components(const LabelMask& mask) {
  const Dims d = mask.dims();
  const auto nx = std::int64_t(d.nx), ny = std::int64_t(d.ny), nz = std::int64_t(d.nz);
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || seen[seed]) continue;
    std::vector<std::size_t> comp;
    seen[seed] = 1;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      const auto x = std::int64_t(v % d.nx);
      const auto y = std::int64_t((v / d.nx) % d.ny);
      const auto z = std::int64_t(v / (std::size_t(d.nx) * d.ny));
      for (std::int64_t dz = -1; dz <= 1; ++dz) {
        const std::int64_t zz = z + dz;
        if (zz < 0 || zz >= nz) continue;
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          const std::int64_t yy = y + dy;
          if (yy < 0 || yy >= ny) continue;
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            const std::int64_t xx = x + dx;
            if (xx < 0 || xx >= nx) continue;
            const std::size_t n = mask.geometry().linear(xx, yy, zz);
            if (mask[n] && !seen[n]) {
              seen[n] = 1;
              stack.push_back(n);
            }
          }
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return out;
}

LabelMask keep_largest_components(const LabelMask& mask, std::size_t k) {
  const auto comps = connected_components(mask);
  std::vector<std::uint8_t> labels(mask.size(), 0);
  for (std::size_t i = 0; i < std::min(k, comps.size()); ++i) {
    for (std::size_t v : comps[i]) labels[v] = 1;
  }
  return LabelMask(mask.geometry(), std::move(labels));
}

Vec3 centroid_world(const GridGeometry& geometry, const std::vector<Index3>& voxels) {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : voxels) sum += geometry.world(p);
  return voxels.empty() ? sum : Vec3(sum / double(voxels.size()));
}

CanalSplit split_components(const LabelMask& mask, std::size_t min_size) {
  const auto comps = connected_components(mask);
  if (comps.size() < 2 || comps[1].size() < min_size) throw InsufficientAnchors();
  const GridGeometry& g = mask.geometry();
  auto to_index = [&](const std::vector<std::size_t>& c) {
    std::vector<Index3> v;
    v.reserve(c.size());
    for (std::size_t i : c) v.push_back(g.index_of(i));
    return v;
  };
  CanalSplit s{to_index(comps[0]), to_index(comps[1])};
  if (centroid_world(g, s.left).x() > centroid_world(g, s.right).x()) std::swap(s.left, s.right);
  return s;
}

}  // namespace lsc
