#include "lsc/training.hpp"

#include <cmath>

namespace lsc {

nn::Tensor4<float> to_tensor(const Cuboid<float>& image) {
  return nn::Tensor4<float>({1, kCuboidSide, kCuboidSide, kCuboidSide}, image.values);
}

std::vector<float> to_target(const Cuboid<std::uint8_t>& labels) {
  return {labels.values.begin(), labels.values.end()};
}

TrainSample make_sample(const TrainingPair& pair) { return {to_tensor(pair.image), to_target(pair.labels)}; }

JointLoss train_step(nn::MffNet<float>& net, nn::Adam<float>& optimizer, const std::vector<TrainSample>& batch,
                     const LossOptions& loss, std::int64_t iteration) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  net.zero_grad();
  JointLoss mean;
  const double scale = 1.0 / double(batch.size());
  for (const auto& s : batch) {
    const auto out = net.forward(s.input, nn::Mode::Train);
    std::vector<std::span<const float>> aux;
    for (const auto& a : out.aux) aux.push_back(a.values());
    const JointLoss l = joint_loss<float>(out.main.values(), aux, s.target, net.config().lambda, loss, true);
    if (!std::isfinite(l.total)) throw TrainingDiverged(iteration);

    auto as_tensor = [&](const std::vector<double>& g, const nn::Shape4& shape) {
      nn::Tensor4<float> t(shape);
      for (std::size_t i = 0; i < g.size(); ++i) t.data()[i] = float(g[i] * scale);
      return t;
    };
    std::vector<nn::Tensor4<float>> grad_aux;
    for (std::size_t k = 0; k < out.aux.size(); ++k) grad_aux.push_back(as_tensor(l.grad_aux[k], out.aux[k].shape()));
    net.backward(as_tensor(l.grad_main, out.main.shape()), grad_aux);

    mean.total += scale * l.total;
    mean.dsc_main += scale * l.dsc_main;
    mean.ce_main += scale * l.ce_main;
    mean.class_weight += scale * l.class_weight;
    mean.dsc_aux.resize(l.dsc_aux.size());
    mean.ce_aux.resize(l.ce_aux.size());
    for (std::size_t k = 0; k < l.dsc_aux.size(); ++k) {
      mean.dsc_aux[k] += scale * l.dsc_aux[k];
      mean.ce_aux[k] += scale * l.ce_aux[k];
    }
  }
  for (const auto& p : net.parameters()) {
    for (float g : p.param->grad) {
      if (!std::isfinite(g)) throw TrainingDiverged(iteration);
    }
  }
  optimizer.step();
  return mean;
}

std::vector<JointLoss> train(nn::MffNet<float>& net, nn::Adam<float>& optimizer, const Volume& volume,
                             const LabelMask& mask, const TrainOptions& o, std::ostream* log) {
  if (o.iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (o.batch < 1) throw std::invalid_argument("batch must be at least 1");
  optimizer.set_lr(o.lr);
  const Volume normalized = normalize_intensity(volume, o.norm_lo, o.norm_hi);
  if (log) *log << loss_csv_header(net.config().lambda.size()) << "\n";
  std::vector<JointLoss> history;
  std::uint64_t draw = 0;
  for (int it = 0; it < o.iterations; ++it) {
    std::vector<TrainSample> batch;
    for (int b = 0; b < o.batch; ++b) {
      const std::uint64_t key = o.seed * 0x9E3779B97F4A7C15ULL + draw++;
      batch.push_back(make_sample(sample_training_pair(normalized, mask, key, o.augment)));
    }
    history.push_back(train_step(net, optimizer, batch, o.loss, it));
    if (log) *log << loss_csv_row(it, history.back()) << "\n";
  }
  return history;
}

}  // namespace lsc
