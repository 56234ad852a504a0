#include "lsc/segmentation.hpp"

#include <algorithm>
#include <thread>

#include "lsc/components.hpp"

namespace lsc {

LabelMask threshold_segment(const Volume& vol, float lo, float hi, std::size_t keep) {
  if (!(lo <= hi)) throw std::invalid_argument("threshold band requires lo <= hi");
  std::vector<std::uint8_t> labels(vol.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    labels[i] = vol[i] >= lo && vol[i] <= hi;
    hits += labels[i];
  }
  if (hits == 0) throw EmptySegmentation();
  return keep_largest_components(LabelMask(vol.geometry(), std::move(labels)), keep);
}

std::vector<int> window_starts(int n, int window, int stride) {
  if (window <= 0 || stride <= 0) throw std::invalid_argument("window and stride must be positive");
  if (n < window) throw std::invalid_argument("axis shorter than window");
  std::vector<int> s;
  for (int o = 0; o + window <= n; o += stride) s.push_back(o);
  if (s.back() + window < n) s.push_back(n - window);
  return s;
}

InferResult infer(const nn::MffNet<float>& net, const Volume& vol, const InferOptions& o) {
  const Dims in = vol.dims();
  const int w = o.window;
  const int nx = std::max<int>(int(in.nx), w), ny = std::max<int>(int(in.ny), w), nz = std::max<int>(int(in.nz), w);
  const float air = min_value(vol);
  const float width = o.norm_hi - o.norm_lo;
  if (!(width > 0.0f)) throw std::invalid_argument("normalization window requires lo < hi");

  std::vector<float> padded(std::size_t(nx) * ny * nz);
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const bool inside = x < int(in.nx) && y < int(in.ny) && z < int(in.nz);
        const float v = inside ? vol.at(x, y, z) : air;
        padded[(std::size_t(z) * ny + y) * nx + x] = (std::clamp(v, o.norm_lo, o.norm_hi) - o.norm_lo) / width;
      }

  struct Window {
    int x, y, z;
  };
  std::vector<Window> windows;
  for (int z : window_starts(nz, w, o.stride))
    for (int y : window_starts(ny, w, o.stride))
      for (int x : window_starts(nx, w, o.stride)) windows.push_back({x, y, z});

  std::vector<std::vector<float>> probs(windows.size());
  const int workers = std::clamp(o.workers, 1, std::max<int>(1, int(windows.size())));
  auto run = [&](int worker) {
    nn::MffNet<float> local = net;
    for (std::size_t i = std::size_t(worker); i < windows.size(); i += std::size_t(workers)) {
      const Window& wi = windows[i];
      nn::Tensor4<float> x({1, w, w, w});
      for (int z = 0; z < w; ++z)
        for (int y = 0; y < w; ++y) {
          const float* src = &padded[(std::size_t(wi.z + z) * ny + (wi.y + y)) * nx + wi.x];
          std::copy(src, src + w, &x.at(0, z, y, 0));
        }
      auto out = local.forward(x, nn::Mode::Infer);
      probs[i].assign(out.main.data(), out.main.data() + out.main.size());
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < workers; ++k) pool.emplace_back(run, k);
    for (auto& t : pool) t.join();
  }

  std::vector<float> sum(padded.size(), 0.0f);
  std::vector<std::uint16_t> count(padded.size(), 0);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Window& wi = windows[i];
    for (int z = 0; z < w; ++z)
      for (int y = 0; y < w; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t dst = (std::size_t(wi.z + z) * ny + (wi.y + y)) * nx + (wi.x + x);
          sum[dst] += probs[i][(std::size_t(z) * w + y) * w + x];
          ++count[dst];
        }
  }

  std::vector<float> prob(vol.size());
  std::vector<std::uint8_t> labels(vol.size());
  for (std::uint32_t z = 0; z < in.nz; ++z)
    for (std::uint32_t y = 0; y < in.ny; ++y)
      for (std::uint32_t x = 0; x < in.nx; ++x) {
        const std::size_t src = (std::size_t(z) * ny + y) * nx + x;
        const std::size_t dst = vol.geometry().linear(x, y, z);
        prob[dst] = sum[src] / float(count[src]);
        labels[dst] = prob[dst] > o.threshold;
      }
  InferResult r{Volume(vol.geometry(), std::move(prob)),
                keep_largest_components(LabelMask(vol.geometry(), std::move(labels)), o.keep), false};
  r.empty = r.mask.foreground_count() == 0;
  return r;
}

}  // namespace lsc
