#include "lsc/nn/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace lsc::nn {

std::string Shape4::str() const {
  return std::to_string(c) + "x" + std::to_string(d) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

template <class T>
Tensor4<T>::Tensor4(Shape4 shape, T fill) : shape_(shape), values_(shape.count(), fill) {
  if (shape.c < 0 || shape.d < 0 || shape.h < 0 || shape.w < 0) {
    throw std::invalid_argument("negative tensor extent");
  }
}

template <class T>
Tensor4<T>::Tensor4(Shape4 shape, std::vector<T> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.count()) {
    throw std::invalid_argument("tensor value count does not match shape " + shape_.str());
  }
}

template <class T>
std::span<T> Tensor4<T>::grad() {
  if (grad_.empty()) grad_.assign(values_.size(), T(0));
  return grad_;
}

template <class T>
void Tensor4<T>::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), T(0));
}

template <class T>
Param<T>::Param(std::vector<int> s, T fill) : shape(std::move(s)) {
  const std::size_t n =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, [](std::size_t a, int b) {
        return a * static_cast<std::size_t>(b);
      });
  value.assign(n, fill);
  grad.assign(n, T(0));
}

template <class T>
void Param<T>::zero_grad() {
  grad.assign(value.size(), T(0));
}

template <class T>
Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Shape4 s = parts.front()->shape();
  s.c = 0;
  for (const auto* p : parts) {
    const Shape4& ps = p->shape();
    if (ps.d != s.d || ps.h != s.h || ps.w != s.w) {
      throw std::invalid_argument("concat_channels: spatial mismatch " + ps.str());
    }
    s.c += ps.c;
  }
  Tensor4<T> out(s);
  T* dst = out.data();
  for (const auto* p : parts) dst = std::copy(p->data(), p->data() + p->size(), dst);
  return out;
}

template <class T>
std::vector<Tensor4<T>> split_channels(const Tensor4<T>& whole, const std::vector<int>& channels) {
  const int total = std::accumulate(channels.begin(), channels.end(), 0);
  if (total != whole.shape().c) throw std::invalid_argument("split_channels: channel mismatch");
  std::vector<Tensor4<T>> out;
  const T* src = whole.data();
  for (int c : channels) {
    Shape4 s = whole.shape();
    s.c = c;
    std::vector<T> v(src, src + s.count());
    src += s.count();
    out.emplace_back(s, std::move(v));
  }
  return out;
}

template <class T>
void accumulate(Tensor4<T>& into, const Tensor4<T>& other) {
  if (!(into.shape() == other.shape())) throw std::invalid_argument("accumulate: shape mismatch");
  T* a = into.data();
  const T* b = other.data();
  for (std::size_t i = 0; i < into.size(); ++i) a[i] += b[i];
}

#define LSC_INSTANTIATE(T)                                                                  \
  template class Tensor4<T>;                                                                \
  template struct Param<T>;                                                                 \
  template Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>&);               \
  template std::vector<Tensor4<T>> split_channels(const Tensor4<T>&, const std::vector<int>&); \
  template void accumulate(Tensor4<T>&, const Tensor4<T>&);

LSC_INSTANTIATE(float)
LSC_INSTANTIATE(double)
#undef LSC_INSTANTIATE

}  // namespace lsc::nn
