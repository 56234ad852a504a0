#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "lsc/losses.hpp"
#include "lsc/nn/adam.hpp"
#include "lsc/nn/mff_net.hpp"
#include "lsc/phantom.hpp"

namespace lsc {

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(std::int64_t iteration)
      : std::runtime_error("loss became non-finite at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

/// Network input for a cuboid of normalized intensities.
nn::Tensor4<float> to_tensor(const Cuboid<float>& image);
/// Float copy of a label cuboid.
std::vector<float> to_target(const Cuboid<std::uint8_t>& labels);

struct TrainSample {
  nn::Tensor4<float> input;
  std::vector<float> target;
};

TrainSample make_sample(const TrainingPair& pair);

/// Forward, joint loss and backward for every sample, with gradients averaged
/// over the batch, followed by one Adam step. Returns the batch-mean loss
/// terms. Throws TrainingDiverged when the loss is not finite.
JointLoss train_step(nn::MffNet<float>& net, nn::Adam<float>& optimizer, const std::vector<TrainSample>& batch,
                     const LossOptions& loss = {}, std::int64_t iteration = 0);

struct TrainOptions {
  int iterations = 500;
  int batch = 2;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  LossOptions loss;
  AugmentOptions augment;
  float norm_lo = -1000.0f;
  float norm_hi = 3000.0f;
};

/// Seeded loop over cuboids sampled from (volume, mask). Writes one CSV row
/// per iteration to `log` when given, header first.
std::vector<JointLoss> train(nn::MffNet<float>& net, nn::Adam<float>& optimizer, const Volume& volume,
                             const LabelMask& mask, const TrainOptions& options, std::ostream* log = nullptr);

}  // namespace lsc
