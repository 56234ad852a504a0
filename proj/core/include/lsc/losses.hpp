#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsc/volume.hpp"

namespace lsc {

inline constexpr double kProbabilityClamp = 1e-7;

/// 1 - (2 sum(p g) + smooth) / (sum(p) + sum(g) + smooth).
/// Writes dL/dp into `grad` when it is non-empty.
template <class T>
double dsc_loss(std::span<const T> p, std::span<const T> g, double smooth = 1.0, std::span<double> grad = {});

/// 1 - N_k / N_c, with N_k the foreground count and N_c the voxel count.
template <class T>
double class_weight(std::span<const T> labels);

enum class CeMode {
  /// Foreground voxels weighted by W, background by 1 - W.
  Balanced,
  /// Only foreground voxels contribute, weighted by W.
  ForegroundOnly,
};

/// -(1/n) sum_i w_i log q_i with probabilities clamped to [1e-7, 1 - 1e-7],
/// where q_i is p_i on foreground and 1 - p_i on background.
template <class T>
double weighted_ce(std::span<const T> p, std::span<const T> g, double w, CeMode mode = CeMode::Balanced,
                   std::span<double> grad = {});

struct LossOptions {
  double smooth = 1.0;
  CeMode ce_mode = CeMode::Balanced;
};

struct JointLoss {
  double total = 0.0;
  double dsc_main = 0.0;
  double ce_main = 0.0;
  std::vector<double> dsc_aux;
  std::vector<double> ce_aux;
  double class_weight = 0.0;

  /// dL/dp for the main head and each aux head; filled only when requested.
  std::vector<double> grad_main;
  std::vector<std::vector<double>> grad_aux;
};

/// Main DSC + sum lambda_k DSC_k + main CE + sum lambda_k CE_k, every head
/// compared against the same target. Throws std::invalid_argument when the
/// aux count differs from lambda.size() or any size disagrees.
template <class T>
JointLoss joint_loss(std::span<const T> main, const std::vector<std::span<const T>>& aux,
                     std::span<const T> target, const std::vector<double>& lambda,
                     const LossOptions& options = {}, bool with_grad = false);

/// 2 |A and B| / (|A| + |B|); 1 when both are empty.
double dsc_metric(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
/// Throws std::invalid_argument unless the masks share a geometry.
double dsc_metric(const LabelMask& a, const LabelMask& b);

std::string loss_csv_header(std::size_t aux_heads);
std::string loss_csv_row(std::int64_t iteration, const JointLoss& loss);

}  // namespace lsc
