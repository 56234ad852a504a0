#pragma once

#include <array>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsc/components.hpp"
#include "lsc/geometry.hpp"
#include "lsc/resample.hpp"
#include "lsc/volume.hpp"

namespace lsc {

struct Anchors {
  Vec3 p1 = Vec3::Zero();  // left, extremal against the direction
  Vec3 p2 = Vec3::Zero();  // right, extremal along the direction
};

/// P1 = argmin over `left` of <world(p), direction>, P2 = argmax over `right`.
/// Ties go to the lexicographically smallest world (x, y, z).
///
/// With `cap_mm` > 0 each anchor is instead the weighted mean world position of
/// the voxels whose projection lies within `cap_mm` of the extreme, each voxel
/// weighted by `cap_mm` minus its depth below the extreme.
Anchors find_anchors(const GridGeometry& geometry, const std::vector<Index3>& left,
                     const std::vector<Index3>& right, const Vec3& direction, double cap_mm = 0.0);

struct SagittalFit {
  Vec3 p0 = Vec3::Zero();
  Vec3 x_axis = Vec3::UnitX();
  Anchors anchors;
  int iterations = 0;
  double l1_mm = 0.0;
  bool converged = false;
};

inline constexpr double kDefaultL0 = 0.1;
inline constexpr int kDefaultMaxIter = 50;
inline constexpr double kDefaultAnchorCap = 2.0;

/// Fixed-point re-selection of the anchors along the current left-right axis,
/// starting from world x. Each step moves the axis to unit(P2 - P1) and the
/// origin to their midpoint; L1 is the resulting displacement of the anchors,
/// half their distance times the axis change in radians. Stops once L1 < L0.
/// Without convergence the iterate with the smallest L1 is returned.
SagittalFit refine_sagittal(const GridGeometry& geometry, const std::vector<Index3>& left,
                            const std::vector<Index3>& right, double l0 = kDefaultL0,
                            int max_iter = kDefaultMaxIter, double cap_mm = kDefaultAnchorCap);

struct PlaneFit {
  Vec3 centroid = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // raw total-least-squares normal
  Vec3 z_axis = Vec3::UnitZ();  // normal orthogonalized against x_axis, positive world z
  double rms_mm = 0.0;
};

class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Total-least-squares plane through world points. Throws DegenerateGeometry
/// for fewer than three points, collinear points, or a normal parallel to x_axis.
PlaneFit fit_lsc_plane(const std::vector<Vec3>& points, const Vec3& x_axis);
PlaneFit fit_lsc_plane(const GridGeometry& geometry, const std::vector<Index3>& voxels, const Vec3& x_axis);

struct CalibrationFrame {
  Vec3 origin = Vec3::Zero();
  Vec3 x_axis = Vec3::UnitX();
  Vec3 y_axis = Vec3::UnitY();
  Vec3 z_axis = Vec3::UnitZ();
  Anchors anchors;

  /// Columns x, y, z.
  Mat3 axes() const;
};

/// y = z cross x after removing any x component from z. Throws
/// DegenerateGeometry when the axes are nearly parallel.
CalibrationFrame build_frame(const Vec3& p0, const Vec3& x_axis, const Vec3& z_axis, const Anchors& anchors = {});

/// World-to-calibrated pose q = R^T (p - P0), with R the frame axes.
RigidPose estimate_transform(const CalibrationFrame& frame);

/// Angle of the projection of x_axis onto the xy and xz planes to world x, and
/// of z_axis onto the yz plane to world z, in degrees.
std::array<double, 3> decomposition_angles_deg(const CalibrationFrame& frame);

enum class Rank { Excellent, Good, Failed };
std::string to_string(Rank rank);
Rank rank_from_string(const std::string& s);

struct RankThresholds {
  double max_centroid_gap_slices = 1.0;
  double min_mirror_dsc = 0.8;
};

struct RankResult {
  Rank rank = Rank::Failed;
  bool ranges_overlap = false;
  double centroid_gap_slices = std::numeric_limits<double>::infinity();
  double mirror_dsc = 0.0;
  std::array<std::int64_t, 2> left_z_range{0, -1};
  std::array<std::int64_t, 2> right_z_range{0, -1};
  std::string message;
};

/// DSC between the mask and its reflection x -> nx - 1 - x.
double mirror_dsc(const LabelMask& calibrated);

/// Excellent: axial index ranges of the two canals overlap, centroid z-gap is
/// within the threshold and the mirror DSC reaches its threshold. Good: ranges
/// overlap only. Failed otherwise, including when the split fails.
RankResult rank_result(const LabelMask& calibrated, const RankThresholds& thresholds = {},
                       std::size_t min_component = kMinComponentVoxels);

struct CalibrationOptions {
  double l0_mm = kDefaultL0;
  int max_iter = kDefaultMaxIter;
  double anchor_cap_mm = kDefaultAnchorCap;
  double spacing_mm = 0.5;
  std::size_t min_component = kMinComponentVoxels;
  MaskInterpolation mask_interpolation = MaskInterpolation::Linear;
  RankThresholds thresholds;
  int workers = 1;
};

struct CalibrationReport {
  int iterations = 0;
  double l1_mm = 0.0;
  double l0_mm = kDefaultL0;
  bool converged = false;
  Vec3 p1 = Vec3::Zero();
  Vec3 p2 = Vec3::Zero();
  Vec3 p0 = Vec3::Zero();
  double rms_mm = 0.0;
  std::array<double, 3> angles_deg{};         // Euler x, y, z of the world-to-calibrated rotation
  std::array<double, 3> decomposition_deg{};  // see decomposition_angles_deg
  RigidPose transform;                        // world -> calibrated
  CalibrationFrame frame;
  RankResult rank;
  std::string error;  // non-empty when the pipeline stopped early

  std::string to_json() const;
  /// Throws std::invalid_argument on malformed input.
  static CalibrationReport from_json(const std::string& text);
};

struct CalibrationResult {
  CalibrationReport report;
  std::optional<Volume> volume;  // absent when the pipeline stopped early
  std::optional<LabelMask> mask;
};

/// split, refine, fit, frame, transform, resample, rank. Anchor and geometry
/// failures are reported with rank Failed rather than thrown.
CalibrationResult calibrate(const Volume& volume, const LabelMask& mask, const CalibrationOptions& options = {});

/// Report and calibrated mask only, skipping the intensity resample.
CalibrationResult calibrate_mask(const LabelMask& mask, const CalibrationOptions& options = {});

}  // namespace lsc
