#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lsc/nn/tensor.hpp"

namespace lsc::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `value` in place. `step` counts from 1.
template <class T>
void sgd_adam_step(std::span<T> value, std::span<const T> grad, std::span<T> m, std::span<T> v,
                   std::int64_t step, const AdamHyper& hyper);

/// Adam state for a fixed list of parameters.
template <class T>
class Adam {
 public:
  Adam(std::vector<NamedParam<T>> params, AdamHyper hyper = {});

  void step();

  std::int64_t steps() const { return step_; }
  const AdamHyper& hyper() const { return hyper_; }
  void set_lr(double lr) { hyper_.lr = lr; }

  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  void set_steps(std::int64_t s) { step_ = s; }

 private:
  std::vector<NamedParam<T>> params_;
  AdamHyper hyper_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::int64_t step_ = 0;
};

}  // namespace lsc::nn
