#include "lsc/calibration.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "lsc/resample.hpp"

namespace lsc {
namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

// sign = -1 picks the minimum projection, +1 the maximum.
Vec3 extremal(const GridGeometry& g, const std::vector<Index3>& voxels, const Vec3& dir, double sign, double cap) {
  if (voxels.empty()) throw InsufficientAnchors();
  Vec3 best = g.world(voxels.front());
  double best_proj = sign * best.dot(dir);
  for (std::size_t i = 1; i < voxels.size(); ++i) {
    const Vec3 p = g.world(voxels[i]);
    const double proj = sign * p.dot(dir);
    if (proj > best_proj || (proj == best_proj && lex_less(p, best))) {
      best = p;
      best_proj = proj;
    }
  }
  if (cap <= 0.0) return best;
  Vec3 sum = Vec3::Zero();
  double n = 0.0;
  for (const auto& v : voxels) {
    const Vec3 p = g.world(v);
    const double w = cap - (best_proj - sign * p.dot(dir));
    if (w > 0.0) {
      sum += w * p;
      n += w;
    }
  }
  return sum / n;
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

Anchors find_anchors(const GridGeometry& geometry, const std::vector<Index3>& left,
                     const std::vector<Index3>& right, const Vec3& direction, double cap_mm) {
  return {extremal(geometry, left, direction, -1.0, cap_mm), extremal(geometry, right, direction, 1.0, cap_mm)};
}

SagittalFit refine_sagittal(const GridGeometry& geometry, const std::vector<Index3>& left,
                            const std::vector<Index3>& right, double l0, int max_iter, double cap_mm) {
  if (!(l0 > 0.0)) throw std::invalid_argument("refine_sagittal: L0 must be positive");
  if (max_iter < 1) throw std::invalid_argument("refine_sagittal: max_iter must be at least 1");
  Vec3 d = Vec3::UnitX();
  SagittalFit best;
  best.l1_mm = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    const Anchors a = find_anchors(geometry, left, right, d, cap_mm);
    const Vec3 span = a.p2 - a.p1;
    if (span.norm() == 0.0) throw DegenerateGeometry("refine_sagittal: anchors coincide");
    const Vec3 next = span.normalized();
    const Vec3 p0 = 0.5 * (a.p1 + a.p2);
    const double l1 = 0.5 * span.norm() * deg_to_rad(angle_between_deg(d, next));
    if (l1 < best.l1_mm) best = {p0, next, a, it, l1, false};
    best.iterations = it;
    d = next;
    if (l1 < l0) {
      best = {p0, next, a, it, l1, true};
      return best;
    }
  }
  return best;
}

PlaneFit fit_lsc_plane(const std::vector<Vec3>& points, const Vec3& x_axis) {
  if (points.size() < 3) throw DegenerateGeometry("plane fit needs at least three points");
  PlaneFit fit;
  for (const auto& p : points) fit.centroid += p;
  fit.centroid /= double(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 q = p - fit.centroid;
    cov += q * q.transpose();
  }
  cov /= double(points.size());
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();  // ascending
  if (ev(1) <= 1e-12 * std::max(ev(2), 1e-300)) throw DegenerateGeometry("plane fit: points are collinear");
  fit.normal = es.eigenvectors().col(0);
  fit.rms_mm = std::sqrt(std::max(ev(0), 0.0));
  const Vec3 x = x_axis.normalized();
  Vec3 z = fit.normal - fit.normal.dot(x) * x;
  if (z.norm() < 1e-6) throw DegenerateGeometry("plane normal is parallel to the left-right axis");
  z.normalize();
  if (z.z() < 0.0) z = -z;
  fit.z_axis = z;
  if (fit.normal.z() < 0.0) fit.normal = -fit.normal;
  return fit;
}

PlaneFit fit_lsc_plane(const GridGeometry& geometry, const std::vector<Index3>& voxels, const Vec3& x_axis) {
  std::vector<Vec3> pts;
  pts.reserve(voxels.size());
  for (const auto& v : voxels) pts.push_back(geometry.world(v));
  return fit_lsc_plane(pts, x_axis);
}

Mat3 CalibrationFrame::axes() const {
  Mat3 r;
  r.col(0) = x_axis;
  r.col(1) = y_axis;
  r.col(2) = z_axis;
  return r;
}

CalibrationFrame build_frame(const Vec3& p0, const Vec3& x_axis, const Vec3& z_axis, const Anchors& anchors) {
  const Vec3 x = x_axis.normalized();
  Vec3 z = z_axis - z_axis.dot(x) * x;
  if (z.norm() < 1e-6 * z_axis.norm() || z_axis.norm() == 0.0) {
    throw DegenerateGeometry("build_frame: axes are nearly parallel");
  }
  z.normalize();
  CalibrationFrame f;
  f.origin = p0;
  f.x_axis = x;
  f.z_axis = z;
  f.y_axis = z.cross(x).normalized();
  f.anchors = anchors;
  return f;
}

RigidPose estimate_transform(const CalibrationFrame& frame) {
  RigidPose pose;
  pose.rotation = frame.axes().transpose();
  pose.translation = -(pose.rotation * frame.origin);
  return pose;
}

std::array<double, 3> decomposition_angles_deg(const CalibrationFrame& f) {
  return {rad_to_deg(std::atan2(f.x_axis.y(), f.x_axis.x())), rad_to_deg(std::atan2(f.x_axis.z(), f.x_axis.x())),
          rad_to_deg(std::atan2(f.z_axis.y(), f.z_axis.z()))};
}

std::string to_string(Rank rank) {
  switch (rank) {
    case Rank::Excellent: return "Excellent";
    case Rank::Good: return "Good";
    case Rank::Failed: return "Failed";
  }
  return "Failed";
}

Rank rank_from_string(const std::string& s) {
  if (s == "Excellent") return Rank::Excellent;
  if (s == "Good") return Rank::Good;
  if (s == "Failed") return Rank::Failed;
  throw std::invalid_argument("unknown rank '" + s + "'");
}

double mirror_dsc(const LabelMask& m) {
  const Dims d = m.dims();
  std::vector<std::uint8_t> mirrored(m.size());
  for (std::uint32_t z = 0; z < d.nz; ++z)
    for (std::uint32_t y = 0; y < d.ny; ++y)
      for (std::uint32_t x = 0; x < d.nx; ++x)
        mirrored[m.geometry().linear(x, y, z)] = m.at(d.nx - 1 - x, y, z);
  std::size_t na = 0, both = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    na += m[i];
    both += m[i] & mirrored[i];
  }
  return na == 0 ? 1.0 : double(both) / double(na);
}

RankResult rank_result(const LabelMask& calibrated, const RankThresholds& t, std::size_t min_component) {
  RankResult r;
  CanalSplit split;
  try {
    split = split_components(calibrated, min_component);
  } catch (const InsufficientAnchors& e) {
    r.message = e.what();
    return r;
  }
  auto summarize = [](const std::vector<Index3>& v, std::array<std::int64_t, 2>& range) {
    range = {v.front().z, v.front().z};
    double sum = 0.0;
    for (const auto& p : v) {
      range[0] = std::min(range[0], p.z);
      range[1] = std::max(range[1], p.z);
      sum += double(p.z);
    }
    return sum / double(v.size());
  };
  const double zl = summarize(split.left, r.left_z_range);
  const double zr = summarize(split.right, r.right_z_range);
  r.centroid_gap_slices = std::abs(zl - zr);
  r.ranges_overlap = r.left_z_range[0] <= r.right_z_range[1] && r.right_z_range[0] <= r.left_z_range[1];
  r.mirror_dsc = mirror_dsc(calibrated);
  if (!r.ranges_overlap) {
    r.rank = Rank::Failed;
    r.message = "canals do not share an axial slice";
  } else if (r.centroid_gap_slices <= t.max_centroid_gap_slices && r.mirror_dsc >= t.min_mirror_dsc) {
    r.rank = Rank::Excellent;
  } else {
    r.rank = Rank::Good;
  }
  return r;
}

std::string CalibrationReport::to_json() const {
  nlohmann::ordered_json j;
  j["iterations"] = iterations;
  j["l1_mm"] = l1_mm;
  j["l0_mm"] = l0_mm;
  j["converged"] = converged;
  j["p1"] = vec_json(p1);
  j["p2"] = vec_json(p2);
  j["p0"] = vec_json(p0);
  j["rms_mm"] = rms_mm;
  j["angles_deg"] = angles_deg;
  j["decomposition_deg"] = decomposition_deg;
  j["rank"] = to_string(rank.rank);
  j["slice_gap"] = std::isfinite(rank.centroid_gap_slices) ? nlohmann::ordered_json(rank.centroid_gap_slices)
                                                            : nlohmann::ordered_json(nullptr);
  j["ranges_overlap"] = rank.ranges_overlap;
  j["mirror_dsc"] = rank.mirror_dsc;
  j["left_z_range"] = rank.left_z_range;
  j["right_z_range"] = rank.right_z_range;
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(transform.rotation(r, c));
  j["rotation"] = rot;
  j["translation"] = vec_json(transform.translation);
  j["x_axis"] = vec_json(frame.x_axis);
  j["y_axis"] = vec_json(frame.y_axis);
  j["z_axis"] = vec_json(frame.z_axis);
  if (!error.empty()) j["error"] = error;
  if (!rank.message.empty()) j["message"] = rank.message;
  return j.dump(2) + "\n";
}

CalibrationReport CalibrationReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CalibrationReport r;
    r.iterations = j.at("iterations").get<int>();
    r.l1_mm = j.at("l1_mm").get<double>();
    r.l0_mm = j.at("l0_mm").get<double>();
    r.converged = j.value("converged", false);
    r.p1 = vec_from(j.at("p1"));
    r.p2 = vec_from(j.at("p2"));
    if (j.contains("p0")) r.p0 = vec_from(j["p0"]);
    r.rms_mm = j.at("rms_mm").get<double>();
    r.angles_deg = j.at("angles_deg").get<std::array<double, 3>>();
    if (j.contains("decomposition_deg")) r.decomposition_deg = j["decomposition_deg"].get<std::array<double, 3>>();
    r.rank.rank = rank_from_string(j.at("rank").get<std::string>());
    if (j.contains("slice_gap") && !j["slice_gap"].is_null()) r.rank.centroid_gap_slices = j["slice_gap"].get<double>();
    r.rank.ranges_overlap = j.value("ranges_overlap", false);
    r.rank.mirror_dsc = j.value("mirror_dsc", 0.0);
    if (j.contains("left_z_range")) r.rank.left_z_range = j["left_z_range"].get<std::array<std::int64_t, 2>>();
    if (j.contains("right_z_range")) r.rank.right_z_range = j["right_z_range"].get<std::array<std::int64_t, 2>>();
    if (j.contains("rotation")) {
      const auto rot = j["rotation"].get<std::vector<double>>();
      if (rot.size() != 9) throw std::invalid_argument("rotation needs 9 entries");
      for (int k = 0; k < 9; ++k) r.transform.rotation(k / 3, k % 3) = rot[std::size_t(k)];
    }
    if (j.contains("translation")) r.transform.translation = vec_from(j["translation"]);
    if (j.contains("x_axis")) r.frame.x_axis = vec_from(j["x_axis"]);
    if (j.contains("y_axis")) r.frame.y_axis = vec_from(j["y_axis"]);
    if (j.contains("z_axis")) r.frame.z_axis = vec_from(j["z_axis"]);
    r.frame.origin = r.p0;
    r.frame.anchors = {r.p1, r.p2};
    r.error = j.value("error", std::string());
    r.rank.message = j.value("message", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("calibration report: ") + e.what());
  }
}

namespace {

CalibrationResult run(const Volume* volume, const LabelMask& mask, const CalibrationOptions& o) {
  CalibrationResult out;
  CalibrationReport& rep = out.report;
  rep.l0_mm = o.l0_mm;
  try {
    const GridGeometry& g = mask.geometry();
    const CanalSplit split = split_components(mask, o.min_component);
    const SagittalFit sag = refine_sagittal(g, split.left, split.right, o.l0_mm, o.max_iter, o.anchor_cap_mm);
    rep.iterations = sag.iterations;
    rep.l1_mm = sag.l1_mm;
    rep.converged = sag.converged;
    rep.p1 = sag.anchors.p1;
    rep.p2 = sag.anchors.p2;
    rep.p0 = sag.p0;

    std::vector<Index3> all = split.left;
    all.insert(all.end(), split.right.begin(), split.right.end());
    const PlaneFit plane = fit_lsc_plane(g, all, sag.x_axis);
    rep.rms_mm = plane.rms_mm;

    rep.frame = build_frame(sag.p0, sag.x_axis, plane.z_axis, sag.anchors);
    rep.transform = estimate_transform(rep.frame);
    rep.angles_deg = euler_deg_from_rotation(rep.transform.rotation);
    rep.decomposition_deg = decomposition_angles_deg(rep.frame);
  } catch (const InsufficientAnchors& e) {
    rep.error = e.what();
    rep.rank.message = e.what();
    return out;
  } catch (const DegenerateGeometry& e) {
    rep.error = e.what();
    rep.rank.message = e.what();
    return out;
  }
  out.mask = resample(mask, rep.transform, o.spacing_mm, o.workers, o.mask_interpolation);
  if (volume) out.volume = resample(*volume, rep.transform, o.spacing_mm, o.workers);
  rep.rank = rank_result(*out.mask, o.thresholds, o.min_component);
  return out;
}

}  // namespace

CalibrationResult calibrate(const Volume& volume, const LabelMask& mask, const CalibrationOptions& options) {
  if (!(volume.geometry() == mask.geometry())) {
    throw std::invalid_argument("calibrate: volume and mask have different geometry");
  }
  return run(&volume, mask, options);
}

CalibrationResult calibrate_mask(const LabelMask& mask, const CalibrationOptions& options) {
  return run(nullptr, mask, options);
}

}  // namespace lsc
