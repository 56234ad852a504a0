#pragma once

#include <stdexcept>

#include "lsc/nn/mff_net.hpp"
#include "lsc/volume.hpp"

namespace lsc {

class EmptySegmentation : public std::runtime_error {
 public:
  EmptySegmentation() : std::runtime_error("empty segmentation") {}
};

/// Voxels with lo <= v <= hi, reduced to the `keep` largest 26-connected
/// components. Throws EmptySegmentation when nothing falls inside the band.
LabelMask threshold_segment(const Volume& vol, float lo, float hi, std::size_t keep = 2);

struct InferOptions {
  int window = kCuboidSide;
  int stride = kCuboidSide / 2;
  float threshold = 0.5f;
  std::size_t keep = 2;
  int workers = 1;
  float norm_lo = -1000.0f;
  float norm_hi = 3000.0f;
};

struct InferResult {
  Volume probability;
  LabelMask mask;
  bool empty = false;
};

/// Window origins along one axis of length n (n >= window): multiples of the
/// stride plus a final window flush with the far edge.
std::vector<int> window_starts(int n, int window, int stride);

/// Sliding-window inference on raw intensities. Axes shorter than the window
/// are padded with the volume minimum and cropped back afterwards.
/// Overlapping probabilities are averaged; voxels with p > threshold are kept,
/// then reduced to the `keep` largest components. The result is independent
/// of the worker count.
InferResult infer(const nn::MffNet<float>& net, const Volume& vol, const InferOptions& options = {});

}  // namespace lsc
