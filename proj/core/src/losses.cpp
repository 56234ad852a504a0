#include "lsc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lsc {
namespace {

template <class T>
void check_sizes(std::span<const T> p, std::span<const T> g, std::span<double> grad, const char* what) {
  if (p.size() != g.size()) throw std::invalid_argument(std::string(what) + ": prediction/target size mismatch");
  if (!grad.empty() && grad.size() != p.size()) throw std::invalid_argument(std::string(what) + ": gradient size mismatch");
}

}  // namespace

template <class T>
double dsc_loss(std::span<const T> p, std::span<const T> g, double smooth, std::span<double> grad) {
  check_sizes(p, g, grad, "dsc_loss");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += double(p[i]) * double(g[i]);
    sp += p[i];
    sg += g[i];
  }
  const double num = 2.0 * inter + smooth;
  const double den = sp + sg + smooth;
  if (den == 0.0) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return 0.0;
  }
  if (!grad.empty()) {
    const double inv = 1.0 / (den * den);
    for (std::size_t i = 0; i < p.size(); ++i) grad[i] = (num - 2.0 * double(g[i]) * den) * inv;
  }
  return 1.0 - num / den;
}

template <class T>
double class_weight(std::span<const T> labels) {
  if (labels.empty()) return 1.0;
  std::size_t fg = 0;
  for (T v : labels) fg += v > T(0.5) ? 1 : 0;
  return 1.0 - double(fg) / double(labels.size());
}

template <class T>
double weighted_ce(std::span<const T> p, std::span<const T> g, double w, CeMode mode, std::span<double> grad) {
  check_sizes(p, g, grad, "weighted_ce");
  if (p.empty()) return 0.0;
  const double n = double(p.size());
  const double wb = mode == CeMode::Balanced ? 1.0 - w : 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double raw = p[i];
    const double q = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const bool inside = raw > kProbabilityClamp && raw < 1.0 - kProbabilityClamp;
    const double gi = g[i];
    sum += gi * w * std::log(q) + (1.0 - gi) * wb * std::log(1.0 - q);
    if (!grad.empty()) grad[i] = inside ? -(gi * w / q - (1.0 - gi) * wb / (1.0 - q)) / n : 0.0;
  }
  return -sum / n;
}

template <class T>
JointLoss joint_loss(std::span<const T> main, const std::vector<std::span<const T>>& aux,
                     std::span<const T> target, const std::vector<double>& lambda, const LossOptions& o,
                     bool with_grad) {
  if (aux.size() != lambda.size()) {
    throw std::invalid_argument("joint_loss: " + std::to_string(aux.size()) + " aux heads but " +
                                std::to_string(lambda.size()) + " weights");
  }
  JointLoss r;
  const std::size_t n = target.size();
  r.class_weight = class_weight(target);
  std::vector<double> g_dsc, g_ce;
  if (with_grad) {
    g_dsc.resize(n);
    g_ce.resize(n);
  }
  auto head = [&](std::span<const T> p, double scale, double& dsc, double& ce, std::vector<double>* out) {
    dsc = dsc_loss<T>(p, target, o.smooth, g_dsc);
    ce = weighted_ce<T>(p, target, r.class_weight, o.ce_mode, g_ce);
    if (out) {
      out->resize(n);
      for (std::size_t i = 0; i < n; ++i) (*out)[i] = scale * (g_dsc[i] + g_ce[i]);
    }
  };
  head(main, 1.0, r.dsc_main, r.ce_main, with_grad ? &r.grad_main : nullptr);
  r.dsc_aux.resize(aux.size());
  r.ce_aux.resize(aux.size());
  if (with_grad) r.grad_aux.resize(aux.size());
  double aux_dsc = 0.0, aux_ce = 0.0;
  for (std::size_t k = 0; k < aux.size(); ++k) {
    head(aux[k], lambda[k], r.dsc_aux[k], r.ce_aux[k], with_grad ? &r.grad_aux[k] : nullptr);
    aux_dsc += lambda[k] * r.dsc_aux[k];
    aux_ce += lambda[k] * r.ce_aux[k];
  }
  r.total = r.dsc_main + aux_dsc + r.ce_main + aux_ce;
  return r;
}

double dsc_metric(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dsc_metric: size mismatch");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] != 0;
    nb += b[i] != 0;
    both += (a[i] != 0) && (b[i] != 0);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(both) / double(na + nb);
}

double dsc_metric(const LabelMask& a, const LabelMask& b) {
  if (!(a.geometry() == b.geometry())) throw std::invalid_argument("dsc_metric: masks have different geometry");
  return dsc_metric(a.values(), b.values());
}

std::string loss_csv_header(std::size_t aux_heads) {
  std::string s = "iteration,dsc_main,ce_main";
  for (std::size_t k = 0; k < aux_heads; ++k) s += ",dsc_aux_" + std::to_string(k + 1);
  for (std::size_t k = 0; k < aux_heads; ++k) s += ",ce_aux_" + std::to_string(k + 1);
  return s + ",total";
}

std::string loss_csv_row(std::int64_t iteration, const JointLoss& l) {
  char buf[64];
  std::string s = std::to_string(iteration);
  auto add = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.9g", v);
    s += buf;
  };
  add(l.dsc_main);
  add(l.ce_main);
  for (double v : l.dsc_aux) add(v);
  for (double v : l.ce_aux) add(v);
  add(l.total);
  return s;
}

#define LSC_INSTANTIATE(T)                                                                                \
  template double dsc_loss<T>(std::span<const T>, std::span<const T>, double, std::span<double>);        \
  template double class_weight<T>(std::span<const T>);                                                    \
  template double weighted_ce<T>(std::span<const T>, std::span<const T>, double, CeMode, std::span<double>); \
  template JointLoss joint_loss<T>(std::span<const T>, const std::vector<std::span<const T>>&,            \
                                   std::span<const T>, const std::vector<double>&, const LossOptions&, bool);

LSC_INSTANTIATE(float)
LSC_INSTANTIATE(double)
#undef LSC_INSTANTIATE

}  // namespace lsc
