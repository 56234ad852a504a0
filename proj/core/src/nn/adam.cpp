#include "lsc/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace lsc::nn {

template <class T>
void sgd_adam_step(std::span<T> value, std::span<const T> grad, std::span<T> m, std::span<T> v,
                   std::int64_t step, const AdamHyper& h) {
  if (grad.size() != value.size() || m.size() != value.size() || v.size() != value.size()) {
    throw std::invalid_argument("sgd_adam_step: size mismatch");
  }
  if (step < 1) throw std::invalid_argument("sgd_adam_step: step counts from 1");
  const double c1 = 1.0 - std::pow(h.beta1, double(step));
  const double c2 = 1.0 - std::pow(h.beta2, double(step));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    m[i] = T(mi);
    v[i] = T(vi);
    value[i] = T(value[i] - h.lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps));
  }
}

template <class T>
Adam<T>::Adam(std::vector<NamedParam<T>> params, AdamHyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
  for (const auto& p : params_) {
    m_.emplace_back(p.param->size(), T(0));
    v_.emplace_back(p.param->size(), T(0));
  }
}

template <class T>
void Adam<T>::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param<T>& p = *params_[i].param;
    sgd_adam_step<T>(p.value, p.grad, m_[i], v_[i], step_, hyper_);
  }
}

template void sgd_adam_step<float>(std::span<float>, std::span<const float>, std::span<float>,
                                   std::span<float>, std::int64_t, const AdamHyper&);
template void sgd_adam_step<double>(std::span<double>, std::span<const double>, std::span<double>,
                                    std::span<double>, std::int64_t, const AdamHyper&);
template class Adam<float>;
template class Adam<double>;

}  // namespace lsc::nn
