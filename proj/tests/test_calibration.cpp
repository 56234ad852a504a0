#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "lsc/calibration.hpp"
#include "lsc/phantom.hpp"
#include "lsc/resample.hpp"

using namespace lsc;

namespace {

LabelMask mask_from(const GridGeometry& g, const std::vector<Index3>& on) {
  std::vector<std::uint8_t> v(g.dims.count(), 0);
  for (const Index3& p : on) v[g.linear(p.x, p.y, p.z)] = 1;
  return {g, v};
}

// Solid box of voxels [x0, x0 + n) x [y0, y0 + n) x [z0, z0 + nz).
void add_box(std::vector<Index3>& out, int x0, int y0, int z0, int n, int nz) {
  for (int z = z0; z < z0 + nz; ++z)
    for (int y = y0; y < y0 + n; ++y)
      for (int x = x0; x < x0 + n; ++x) out.push_back({x, y, z});
}

PhantomSpec skewed(double rx, double ry, double rz, Vec3 t = Vec3::Zero()) {
  PhantomSpec s;
  s.skew.rotation = rotation_from_euler_deg(rx, ry, rz);
  s.skew.translation = t;
  return s;
}

double analytic_single_canal_voxels(const PhantomSpec& s) {
  const double pi = std::numbers::pi;
  return (s.arc_span_deg / 360.0) * 2.0 * pi * s.major_radius * pi * s.tube_radius * s.tube_radius /
         (double(s.spacing[0]) * s.spacing[1] * s.spacing[2]);
}

// Voxel-center DSC of two masks on a shared world lattice.
double aligned_dsc(const LabelMask& a, const LabelMask& b) {
  const GridGeometry& ga = a.geometry();
  const GridGeometry& gb = b.geometry();
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i]) continue;
    const Vec3 j = gb.index(ga.world(ga.index_of(i)));
    const Index3 q{std::llround(j.x()), std::llround(j.y()), std::llround(j.z())};
    if (gb.contains(q) && b.at(q.x, q.y, q.z)) ++both;
  }
  return 2.0 * double(both) / double(a.foreground_count() + b.foreground_count());
}

}  // namespace

TEST(Components, TwoSingleVoxelBlobs) {
  const GridGeometry g{{48, 4, 4}};
  const LabelMask m = mask_from(g, {{1, 2, 2}, {40, 2, 2}});
  const CanalSplit s = split_components(m, 1);
  ASSERT_EQ(s.left.size(), 1u);
  ASSERT_EQ(s.right.size(), 1u);
  EXPECT_EQ(s.left[0].x, 1);
  EXPECT_EQ(s.right[0].x, 40);
}

TEST(Components, DiagonalNeighboursAreConnected) {
  const GridGeometry g{{6, 6, 6}};
  const LabelMask m = mask_from(g, {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {5, 5, 5}});
  const auto comps = connected_components(m);
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0].size(), 3u);
  EXPECT_EQ(comps[1].size(), 1u);
  const LabelMask kept = keep_largest_components(m, 1);
  EXPECT_EQ(kept.foreground_count(), 3u);
  EXPECT_EQ(kept.at(5, 5, 5), 0);
}

TEST(Components, SplitErrors) {
  const GridGeometry g{{48, 8, 8}};
  std::vector<Index3> one;
  add_box(one, 2, 2, 2, 3, 3);
  EXPECT_THROW(split_components(mask_from(g, one)), InsufficientAnchors);
  std::vector<Index3> two = one;
  two.push_back({40, 4, 4});
  EXPECT_THROW(split_components(mask_from(g, two)), InsufficientAnchors);
  add_box(two, 40, 2, 2, 3, 3);
  EXPECT_NO_THROW(split_components(mask_from(g, two)));
}

TEST(Components, PhantomCanalSizesMatchTubeVolume) {
  const PhantomSpec spec;
  const CanalSplit s = split_components(generate_phantom(spec).mask);
  const double expect = analytic_single_canal_voxels(spec);
  EXPECT_NEAR(double(s.left.size()), expect, 0.2 * expect);
  EXPECT_NEAR(double(s.right.size()), expect, 0.2 * expect);
}

TEST(Anchors, ExtremalAlongDirection) {
  const GridGeometry g{{4, 4, 4}};
  const Anchors a = find_anchors(g, {{0, 0, 0}, {1, 0, 0}}, {{2, 0, 0}, {3, 1, 0}}, Vec3::UnitX());
  EXPECT_EQ(a.p1, Vec3(0, 0, 0));
  EXPECT_EQ(a.p2, Vec3(3, 1, 0));
}

TEST(Anchors, TiesGoToLexicographicallySmallest) {
  const GridGeometry g{{4, 4, 4}};
  const Anchors a = find_anchors(g, {{0, 3, 1}, {0, 1, 2}, {0, 1, 1}}, {{3, 2, 0}, {3, 0, 3}}, Vec3::UnitX());
  EXPECT_EQ(a.p1, Vec3(0, 1, 1));
  EXPECT_EQ(a.p2, Vec3(3, 0, 3));
  const Anchors b = find_anchors(g, {{0, 1, 1}, {0, 1, 2}, {0, 3, 1}}, {{3, 0, 3}, {3, 2, 0}}, Vec3::UnitX());
  EXPECT_EQ(b.p1, a.p1);
  EXPECT_EQ(b.p2, a.p2);
}

TEST(Anchors, CapAveragesNearExtreme) {
  const GridGeometry g{{8, 4, 4}};
  const Anchors a = find_anchors(g, {{0, 0, 0}, {0, 2, 0}, {5, 0, 0}}, {{7, 1, 0}, {7, 3, 2}}, Vec3::UnitX(), 0.5);
  EXPECT_TRUE(a.p1.isApprox(Vec3(0, 1, 0)));
  EXPECT_TRUE(a.p2.isApprox(Vec3(7, 2, 1)));
}

TEST(Anchors, CapWeightsTaperWithDepth) {
  const GridGeometry g{{8, 4, 4}};
  const Anchors a = find_anchors(g, {{0, 0, 0}, {1, 3, 0}, {2, 0, 0}}, {{7, 0, 0}}, Vec3::UnitX(), 2.0);
  EXPECT_TRUE(a.p1.isApprox(Vec3(1.0 / 3.0, 1.0, 0.0)));
  EXPECT_TRUE(a.p2.isApprox(Vec3(7, 0, 0)));
}

TEST(Anchors, IdentityPhantomOuterPoint) {
  const PhantomSpec spec;
  const Phantom ph = generate_phantom(spec);
  const CanalSplit s = split_components(ph.mask);
  const Anchors a = find_anchors(ph.mask.geometry(), s.left, s.right, Vec3::UnitX());
  const double voxel = std::sqrt(3.0) * spec.spacing[0];
  const double outer = spec.half_separation + spec.major_radius;
  EXPECT_LE((a.p1 - Vec3(-outer, 0, 0)).norm(), voxel + spec.tube_radius);
  EXPECT_LE((a.p2 - Vec3(outer, 0, 0)).norm(), voxel + spec.tube_radius);
  EXPECT_NEAR(a.p1.x(), -outer - spec.tube_radius, spec.spacing[0]);
}

TEST(RefineSagittal, SymmetricPhantomConvergesFast) {
  const Phantom ph = generate_phantom({});
  const CanalSplit s = split_components(ph.mask);
  const SagittalFit f = refine_sagittal(ph.mask.geometry(), s.left, s.right);
  EXPECT_TRUE(f.converged);
  EXPECT_LE(f.iterations, 2);
  EXPECT_LT(f.l1_mm, kDefaultL0);
  EXPECT_LT(angle_between_deg(f.x_axis, Vec3::UnitX()), 0.1);
}

TEST(RefineSagittal, RecoversRotatedAxis) {
  const PhantomSpec spec = skewed(0, 0, 10);
  const Phantom ph = generate_phantom(spec);
  const CanalSplit s = split_components(ph.mask);
  const SagittalFit f = refine_sagittal(ph.mask.geometry(), s.left, s.right);
  EXPECT_LT(angle_between_deg(f.x_axis, spec.skew.rotation * Vec3::UnitX()), 1.0);
}

TEST(RefineSagittal, InfiniteThresholdRunsOnce) {
  const Phantom ph = generate_phantom(skewed(5, -4, 8));
  const CanalSplit s = split_components(ph.mask);
  const SagittalFit f =
      refine_sagittal(ph.mask.geometry(), s.left, s.right, std::numeric_limits<double>::infinity());
  EXPECT_EQ(f.iterations, 1);
  EXPECT_TRUE(f.converged);
}

TEST(RefineSagittal, DeterministicAndBounded) {
  const Phantom ph = generate_phantom(skewed(-12, 9, 14, Vec3(1, -2, 0.5)));
  const CanalSplit s = split_components(ph.mask);
  const SagittalFit a = refine_sagittal(ph.mask.geometry(), s.left, s.right, 1e-9, 4);
  const SagittalFit b = refine_sagittal(ph.mask.geometry(), s.left, s.right, 1e-9, 4);
  EXPECT_LE(a.iterations, 4);
  EXPECT_EQ(a.x_axis, b.x_axis);
  EXPECT_EQ(a.p0, b.p0);
  if (a.converged) EXPECT_LT(a.l1_mm, 1e-9);
  EXPECT_THROW(refine_sagittal(ph.mask.geometry(), s.left, s.right, 0.0), std::invalid_argument);
}

TEST(PlaneFit, ExactPlane) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) pts.emplace_back(i * 1.5, j - 2.0, 5.0);
  const PlaneFit f = fit_lsc_plane(pts, Vec3::UnitX());
  EXPECT_LT(angle_between_deg(f.normal, Vec3::UnitZ()), 1e-9);
  EXPECT_NEAR(f.rms_mm, 0.0, 1e-12);
  EXPECT_GT(f.z_axis.z(), 0.0);
}

TEST(PlaneFit, Degenerate) {
  EXPECT_THROW(fit_lsc_plane(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}}, Vec3::UnitX()), DegenerateGeometry);
  EXPECT_THROW(fit_lsc_plane(std::vector<Vec3>{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}}, Vec3::UnitX()),
               DegenerateGeometry);
  std::vector<Vec3> yz;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) yz.emplace_back(0.0, i, j);
  EXPECT_THROW(fit_lsc_plane(yz, Vec3::UnitX()), DegenerateGeometry);
}

TEST(PlaneFit, IdentityPhantom) {
  const PhantomSpec spec;
  const Phantom ph = generate_phantom(spec);
  const CanalSplit s = split_components(ph.mask);
  std::vector<Index3> all = s.left;
  all.insert(all.end(), s.right.begin(), s.right.end());
  const PlaneFit f = fit_lsc_plane(ph.mask.geometry(), all, Vec3::UnitX());
  EXPECT_LT(angle_between_deg(f.z_axis, Vec3::UnitZ()), 1.0);
  EXPECT_LE(f.rms_mm, spec.tube_radius);
}

TEST(Frame, CanonicalAxes) {
  const CalibrationFrame f = build_frame(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitZ());
  EXPECT_EQ(f.y_axis, Vec3::UnitY());
  const RigidPose t = estimate_transform(f);
  EXPECT_TRUE(t.rotation.isIdentity(1e-15));
  EXPECT_EQ(t.translation, Vec3::Zero());
  EXPECT_THROW(build_frame(Vec3::Zero(), Vec3::UnitX(), Vec3(1, 0, 1e-12)), DegenerateGeometry);
}

TEST(Frame, OrthonormalRightHanded) {
  for (int t = 0; t < 20; ++t) {
    const Vec3 x = Vec3(1.0, 0.2 * hashed_uniform(t, 0), 0.2 * hashed_uniform(t, 1)).normalized();
    const Vec3 z = Vec3(0.3 * hashed_uniform(t, 2), 0.3 * hashed_uniform(t, 3), 1.0).normalized();
    const CalibrationFrame f = build_frame(Vec3(1, 2, 3), x, z);
    const Mat3 r = f.axes();
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
    EXPECT_LT((f.x_axis.cross(f.y_axis) - f.z_axis).norm(), 1e-9);
  }
}

TEST(Frame, SkewedPhantomAxesMatchPose) {
  const PhantomSpec spec = skewed(8, -6, 11, Vec3(1.0, -1.5, 0.5));
  const Phantom ph = generate_phantom(spec);
  const CalibrationResult r = calibrate_mask(ph.mask);
  ASSERT_TRUE(r.report.error.empty());
  const CalibrationFrame& f = r.report.frame;
  EXPECT_LT(angle_between_deg(f.x_axis, ph.pose.rotation.col(0)), 1.0);
  EXPECT_LT(angle_between_deg(f.y_axis, ph.pose.rotation.col(1)), 1.0);
  EXPECT_LT(angle_between_deg(f.z_axis, ph.pose.rotation.col(2)), 1.0);
  const RigidPose residual = r.report.transform.compose(ph.pose);
  EXPECT_LT(rotation_angle_deg(residual.rotation, Mat3::Identity()), 1.0);
  EXPECT_LT(residual.translation.norm(), 1.0);
}

TEST(Transform, AnchorsMapToOppositeX) {
  const Phantom ph = generate_phantom(skewed(4, 7, -9));
  const CalibrationReport rep = calibrate_mask(ph.mask).report;
  const Vec3 q1 = rep.transform.apply(rep.p1), q2 = rep.transform.apply(rep.p2);
  EXPECT_NEAR(q1.x(), -q2.x(), rep.l0_mm);
  EXPECT_LT(q1.x(), 0.0);
  EXPECT_NEAR(rep.transform.apply(rep.p0).norm(), 0.0, 1e-9);
}

TEST(Transform, DecompositionAnglesOfCanonicalFrame) {
  const auto a = decomposition_angles_deg(build_frame(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitZ()));
  for (double v : a) EXPECT_NEAR(v, 0.0, 1e-12);
  const auto b = decomposition_angles_deg(build_frame(Vec3::Zero(), rotation_z(deg_to_rad(10)) * Vec3::UnitX(),
                                                      Vec3::UnitZ()));
  EXPECT_NEAR(b[0], 10.0, 1e-9);
  EXPECT_NEAR(b[1], 0.0, 1e-9);
}

TEST(Resample, IdentityReproducesSharedLattice) {
  const Phantom ph = generate_phantom({.noise_amplitude = 100.0f, .seed = 2});
  const Volume out = resample(ph.volume, RigidPose::identity(), 0.5);
  const GridGeometry& gi = ph.volume.geometry();
  const GridGeometry& go = out.geometry();
  std::size_t checked = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec3 j = gi.index(go.world(go.index_of(i)));
    const Index3 q{std::llround(j.x()), std::llround(j.y()), std::llround(j.z())};
    ASSERT_LT((j - Vec3(double(q.x), double(q.y), double(q.z))).norm(), 1e-6);
    if (!gi.contains(q)) continue;
    ASSERT_NEAR(out[i], ph.volume.at(q.x, q.y, q.z), 1e-6);
    ++checked;
  }
  EXPECT_EQ(checked, ph.volume.size());
  const LabelMask m = resample(ph.mask, RigidPose::identity(), 0.5);
  EXPECT_EQ(m.foreground_count(), ph.mask.foreground_count());
}

TEST(Resample, ConstantVolumeStaysConstantInside) {
  const GridGeometry g{{20, 16, 12}, {0.5f, 0.5f, 0.5f}, {-5.0f, -4.0f, -3.0f}};
  const Volume vol(g, 42.0f);
  const RigidPose pose{rotation_from_euler_deg(13, -8, 21), Vec3(0.3, -0.7, 1.1)};
  const Volume out = resample(vol, pose, 0.4);
  const RigidPose back = pose.inverse();
  std::size_t inside = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec3 w = back.apply(out.geometry().world(out.geometry().index_of(i)));
    EXPECT_EQ(out[i], 42.0f);  // air fill equals the minimum, which is also 42
    inside += g.contains({std::llround(g.index(w).x()), std::llround(g.index(w).y()), std::llround(g.index(w).z())});
  }
  EXPECT_GT(inside, 0u);
}

TEST(Resample, TrilinearReproducesAffineField) {
  const GridGeometry g{{6, 5, 4}, {1.0f, 0.5f, 2.0f}, {0.0f, 0.0f, 0.0f}};
  std::vector<float> v(g.dims.count());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec3 w = g.world(g.index_of(i));
    v[i] = float(1.0 + 2.0 * w.x() - 3.0 * w.y() + 0.5 * w.z());
  }
  const Volume vol(g, v);
  for (int t = 0; t < 50; ++t) {
    const Vec3 idx(2.5 + 2.4 * hashed_uniform(t, 0), 2.0 + 1.9 * hashed_uniform(t, 1), 1.5 + 1.4 * hashed_uniform(t, 2));
    const Vec3 w = g.world(idx);
    EXPECT_NEAR(sample_trilinear(vol, idx, -1.0f), 1.0 + 2.0 * w.x() - 3.0 * w.y() + 0.5 * w.z(), 1e-4);
  }
  EXPECT_EQ(sample_trilinear(vol, Vec3(-0.5, 0, 0), -7.0f), -7.0f);
}

TEST(Resample, CalibratedLatticeIsSymmetricInX) {
  const GridGeometry in = PhantomSpec{}.geometry();
  const RigidPose pose{rotation_from_euler_deg(3, 9, -12), Vec3(2, -1, 4)};
  const GridGeometry out = calibrated_grid(in, pose, 0.5);
  EXPECT_EQ(out.dims.nx % 2, 0u);
  EXPECT_NEAR(out.world(Index3{0, 0, 0}).x(), -out.world(Index3{out.dims.nx - 1, 0, 0}).x(), 1e-6);
  for (int a = 0; a < 3; ++a) {
    const double k = out.origin[a] / 0.5 - 0.5;
    EXPECT_NEAR(k, std::round(k), 1e-4);
  }
}

TEST(Resample, SkewedPhantomCentroidsShareAxialSlice) {
  const Phantom ph = generate_phantom(skewed(-9, 12, 6, Vec3(0.5, 1.0, -1.5)));
  const CalibrationResult r = calibrate_mask(ph.mask);
  ASSERT_TRUE(r.mask.has_value());
  const CanalSplit s = split_components(*r.mask);
  const Vec3 cl = centroid_world(r.mask->geometry(), s.left);
  const Vec3 cr = centroid_world(r.mask->geometry(), s.right);
  EXPECT_LE(std::abs(cl.z() - cr.z()) / 0.5, 1.0);
}

TEST(Rank, ConstructedCases) {
  const GridGeometry g{{32, 12, 24}, {0.5f, 0.5f, 0.5f}, {-7.75f, -2.75f, -5.75f}};
  std::vector<Index3> sym;
  add_box(sym, 3, 3, 8, 4, 4);
  add_box(sym, 25, 3, 8, 4, 4);
  const LabelMask excellent = mask_from(g, sym);
  EXPECT_EQ(mirror_dsc(excellent), 1.0);
  const RankResult e = rank_result(excellent);
  EXPECT_EQ(e.rank, Rank::Excellent);
  EXPECT_NEAR(e.centroid_gap_slices, 0.0, 1e-12);

  std::vector<Index3> shifted;
  add_box(shifted, 3, 3, 8, 4, 4);
  add_box(shifted, 25, 3, 13, 4, 4);
  const RankResult f = rank_result(mask_from(g, shifted));
  EXPECT_FALSE(f.ranges_overlap);
  EXPECT_EQ(f.rank, Rank::Failed);

  // Right box moved two columns outward: the reflections overlap by half.
  std::vector<Index3> half;
  add_box(half, 3, 3, 8, 4, 4);
  add_box(half, 27, 3, 8, 4, 4);
  const LabelMask good = mask_from(g, half);
  EXPECT_NEAR(mirror_dsc(good), 0.5, 1e-12);
  EXPECT_EQ(rank_result(good).rank, Rank::Good);

  std::vector<Index3> lone;
  add_box(lone, 3, 3, 8, 4, 4);
  EXPECT_EQ(rank_result(mask_from(g, lone)).rank, Rank::Failed);
}

TEST(Rank, StringRoundTrip) {
  for (Rank r : {Rank::Excellent, Rank::Good, Rank::Failed}) EXPECT_EQ(rank_from_string(to_string(r)), r);
  EXPECT_THROW(rank_from_string("Perfect"), std::invalid_argument);
}

TEST(Calibrate, IdentityPhantomIsExcellent) {
  const Phantom ph = generate_phantom({});
  const CalibrationResult r = calibrate(ph.volume, ph.mask);
  EXPECT_EQ(r.report.rank.rank, Rank::Excellent);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LE(r.report.l1_mm, r.report.l0_mm);
  ASSERT_TRUE(r.volume.has_value());
  EXPECT_EQ(r.volume->geometry(), r.mask->geometry());
}

TEST(Calibrate, MissingCanalReportsFailed) {
  const Phantom ph = generate_phantom({});
  const LabelMask one = keep_largest_components(ph.mask, 1);
  const CalibrationResult r = calibrate(ph.volume, one);
  EXPECT_EQ(r.report.rank.rank, Rank::Failed);
  EXPECT_FALSE(r.report.error.empty());
  EXPECT_FALSE(r.mask.has_value());
  EXPECT_FALSE(r.volume.has_value());
}

TEST(Calibrate, PipelineEquivariance) {
  for (std::uint64_t t = 0; t < 5; ++t) {
    PhantomSpec a = skewed(15 * hashed_uniform(t, 0), 15 * hashed_uniform(t, 1), 15 * hashed_uniform(t, 2),
                           Vec3(hashed_uniform(t, 3), hashed_uniform(t, 4), hashed_uniform(t, 5)));
    PhantomSpec b = a;
    const Mat3 s = rotation_from_euler_deg(15 * hashed_uniform(t, 6), 15 * hashed_uniform(t, 7),
                                           15 * hashed_uniform(t, 8));
    b.skew.rotation = s * a.skew.rotation;
    b.skew.translation = s * a.skew.translation;
    const CalibrationResult ra = calibrate_mask(generate_phantom(a).mask);
    const CalibrationResult rb = calibrate_mask(generate_phantom(b).mask);
    ASSERT_TRUE(ra.mask && rb.mask);
    EXPECT_GE(aligned_dsc(*ra.mask, *rb.mask), 0.85) << "case " << t;
  }
}

TEST(Report, JsonRoundTrip) {
  const Phantom ph = generate_phantom(skewed(2, 3, 4));
  const CalibrationReport rep = calibrate_mask(ph.mask).report;
  const std::string text = rep.to_json();
  for (const char* key : {"\"iterations\"", "\"l1_mm\"", "\"l0_mm\"", "\"p1\"", "\"p2\"", "\"rms_mm\"",
                          "\"angles_deg\"", "\"rank\""})
    EXPECT_NE(text.find(key), std::string::npos) << key;
  const CalibrationReport back = CalibrationReport::from_json(text);
  EXPECT_EQ(back.iterations, rep.iterations);
  EXPECT_EQ(back.rank.rank, rep.rank.rank);
  EXPECT_LT((back.p1 - rep.p1).norm(), 1e-9);
  EXPECT_LT((back.transform.rotation - rep.transform.rotation).norm(), 1e-9);
  EXPECT_EQ(back.to_json(), text);
  EXPECT_THROW(CalibrationReport::from_json("{\"iterations\": "), std::invalid_argument);
}
