#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "app.hpp"
#include "lsc/calibration.hpp"
#include "lsc/losses.hpp"
#include "lsc/mvol.hpp"
#include "lsc/nn/checkpoint.hpp"
#include "lsc/phantom.hpp"

using namespace lsc;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = app::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lsc_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, PhantomIsDeterministic) {
  ASSERT_EQ(run_cli({"phantom", "--output", path("a"), "--seed", "7", "--noise", "100"}).code, 0);
  ASSERT_EQ(run_cli({"phantom", "--output", path("b"), "--seed", "7", "--noise", "100"}).code, 0);
  for (const char* f : {"volume.mvol", "mask.mvol", "pose.txt", "spec.txt"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(Cli, PhantomSkewIsEncodedInPose) {
  ASSERT_EQ(run_cli({"phantom", "--output", path("p"), "--skew-euler", "10,0,0"}).code, 0);
  std::istringstream in(slurp(dir_ / "p" / "pose.txt"));
  std::vector<double> v;
  for (double x; in >> x;) v.push_back(x);
  ASSERT_EQ(v.size(), 12u);
  const Mat3 rx = rotation_x(deg_to_rad(10.0));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(v[std::size_t(3 * r + c)], rx(r, c), 1e-9);
  for (int k = 9; k < 12; ++k) EXPECT_EQ(v[std::size_t(k)], 0.0);
}

TEST_F(Cli, PhantomMaskMatchesTubeVolume) {
  ASSERT_EQ(run_cli({"phantom", "--output", path("p")}).code, 0);
  const PhantomSpec spec;
  const double expect = 2.0 * (spec.arc_span_deg / 360.0) * 2.0 * M_PI * spec.major_radius * M_PI *
                        spec.tube_radius * spec.tube_radius / 0.125;
  const double got = double(read_mask(dir_ / "p" / "mask.mvol").foreground_count());
  EXPECT_NEAR(got, expect, 0.2 * expect);
}

TEST_F(Cli, PhantomReportsFailingField) {
  const CliResult r = run_cli({"phantom", "--output", path("p"), "--tube-radius", "-1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("tube_radius"), std::string::npos) << r.err;
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  {
    std::ofstream f(path("run.cfg"));
    f << "# overrides\nmajor_radius=3.5\nnoise=50\n";
  }
  ASSERT_EQ(run_cli({"phantom", "--config", path("run.cfg"), "--output", path("p"), "--noise", "0"}).code, 0);
  const std::string spec = slurp(dir_ / "p" / "spec.txt");
  EXPECT_NE(spec.find("major_radius=3.5"), std::string::npos) << spec;
  EXPECT_NE(spec.find("noise=0\n"), std::string::npos) << spec;
}

TEST_F(Cli, ThresholdSegmentationAndEvaluate) {
  ASSERT_EQ(run_cli({"phantom", "--output", path("p")}).code, 0);
  ASSERT_EQ(run_cli({"segment-threshold", "--input", path("p/volume.mvol"), "--output", path("seg.mvol"), "--lo",
                     "-500", "--hi", "500"})
                .code,
            0);
  const CliResult e =
      run_cli({"evaluate", "--input", path("seg.mvol"), "--truth", path("p/mask.mvol"), "--output", path("e.json")});
  ASSERT_EQ(e.code, 0) << e.err;
  const json j = json::parse(slurp(path("e.json")));
  EXPECT_EQ(j["dsc"].get<double>(), 1.0);
  EXPECT_EQ(j["component_dsc"]["left"].get<double>(), 1.0);

  const CliResult none = run_cli({"segment-threshold", "--input", path("p/volume.mvol"), "--output",
                                  path("none.mvol"), "--lo", "5000", "--hi", "6000"});
  EXPECT_EQ(none.code, 1);
  EXPECT_NE(none.err.find("empty segmentation"), std::string::npos);
}

TEST_F(Cli, EvaluateEmptyPredictionAndMismatch) {
  ASSERT_EQ(run_cli({"phantom", "--output", path("p")}).code, 0);
  const LabelMask truth = read_mask(dir_ / "p" / "mask.mvol");
  write_mvol(LabelMask(truth.geometry(), std::vector<std::uint8_t>(truth.size(), 0)), path("empty.mvol"));
  const CliResult e = run_cli(
      {"evaluate", "--input", path("empty.mvol"), "--truth", path("p/mask.mvol"), "--output", path("e.json")});
  EXPECT_EQ(e.code, 0);
  EXPECT_NE(e.err.find("warning: empty prediction"), std::string::npos);
  EXPECT_EQ(json::parse(slurp(path("e.json")))["dsc"].get<double>(), 0.0);

  write_mvol(LabelMask(GridGeometry{{4, 4, 4}}, std::vector<std::uint8_t>(64, 0)), path("small.mvol"));
  const CliResult m = run_cli(
      {"evaluate", "--input", path("small.mvol"), "--truth", path("p/mask.mvol"), "--output", path("m.json")});
  EXPECT_EQ(m.code, 1);
}

TEST_F(Cli, TrainZeroIterationsWritesInitialization) {
  ASSERT_EQ(run_cli({"phantom", "--output", path("p")}).code, 0);
  const CliResult r =
      run_cli({"train", "--input", path("p"), "--output", path("net.ckpt"), "--iterations", "0", "--seed", "11"});
  ASSERT_EQ(r.code, 0) << r.err;
  nn::MffNet<float> fresh({}, 11);
  nn::MffNet<float> loaded = nn::restore_network(nn::read_checkpoint(path("net.ckpt")));
  auto a = fresh.parameters(), b = loaded.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].param->value, b[i].param->value) << a[i].name;
  }
  EXPECT_EQ(slurp(path("net.ckpt.loss.csv")), loss_csv_header(2) + "\n");
}

TEST_F(Cli, InferChecksCheckpointAndWarnsWhenEmpty) {
  write_mvol(Volume(GridGeometry{{48, 48, 48}}, -1000.0f), path("vol.mvol"));
  const CliResult missing =
      run_cli({"infer", "--input", path("vol.mvol"), "--output", path("m.mvol"), "--checkpoint", path("nope")});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("checkpoint not found"), std::string::npos);

  nn::MffNet<float> net({}, 0);
  for (auto& p : net.parameters()) std::fill(p.param->value.begin(), p.param->value.end(), 0.0f);
  nn::write_checkpoint(path("zero.ckpt"), nn::snapshot(net));
  const CliResult r =
      run_cli({"infer", "--input", path("vol.mvol"), "--output", path("m.mvol"), "--checkpoint", path("zero.ckpt")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning: empty segmentation"), std::string::npos);
  EXPECT_EQ(read_mask(path("m.mvol")).foreground_count(), 0u);
}

TEST_F(Cli, CalibrateIdentityPhantom) {
  ASSERT_EQ(run_cli({"phantom", "--output", path("p")}).code, 0);
  const CliResult r = run_cli({"calibrate", "--input", path("p"), "--output", path("c")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CalibrationReport rep = CalibrationReport::from_json(slurp(dir_ / "c" / "report.json"));
  EXPECT_EQ(rep.rank.rank, Rank::Excellent);
  for (double a : rep.angles_deg) EXPECT_LE(std::abs(a), 0.5);
  EXPECT_TRUE(fs::exists(dir_ / "c" / "calibrated_volume.mvol"));
  EXPECT_TRUE(fs::exists(dir_ / "c" / "calibrated_mask.mvol"));

  ASSERT_EQ(run_cli({"calibrate", "--input", path("p"), "--output", path("c2")}).code, 0);
  for (const char* f : {"calibrated_volume.mvol", "calibrated_mask.mvol", "report.json"})
    EXPECT_EQ(slurp(dir_ / "c" / f), slurp(dir_ / "c2" / f)) << f;
}

TEST_F(Cli, CalibrateSkewedPhantomRecoversPose) {
  ASSERT_EQ(run_cli({"phantom", "--output", path("p"), "--skew-euler", "7,-11,13", "--skew-translation",
                     "1,-2,0.5"})
                .code,
            0);
  ASSERT_EQ(run_cli({"calibrate", "--input", path("p"), "--output", path("c")}).code, 0);
  const CliResult e = run_cli({"evaluate", "--input", path("c/calibrated_mask.mvol"), "--truth",
                               path("c/calibrated_mask.mvol"), "--report", path("c/report.json"), "--pose",
                               path("p/pose.txt"), "--output", path("e.json")});
  ASSERT_EQ(e.code, 0) << e.err;
  const json j = json::parse(slurp(path("e.json")));
  EXPECT_LT(j["rotation_error_deg"].get<double>(), 1.0);
  EXPECT_LT(j["translation_error_mm"].get<double>(), 1.0);
  EXPECT_EQ(j["dsc"].get<double>(), 1.0);
}

TEST_F(Cli, CalibrateSingleCanalFails) {
  const Phantom ph = generate_phantom({});
  write_mvol(ph.volume, path("volume.mvol"));
  write_mvol(keep_largest_components(ph.mask, 1), path("mask.mvol"));
  const CliResult r = run_cli({"calibrate", "--input", path("volume.mvol"), "--mask", path("mask.mvol"),
                               "--output", path("c")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("insufficient anchors"), std::string::npos) << r.err;
  EXPECT_EQ(CalibrationReport::from_json(slurp(dir_ / "c" / "report.json")).rank.rank, Rank::Failed);
}

TEST_F(Cli, EvaluateBatchPrintsRankTable) {
  const CliResult r = run_cli({"evaluate", "--batch", "20", "--seed", "3", "--output", path("batch.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rank        count  percent"), std::string::npos);
  const json j = json::parse(slurp(path("batch.json")));
  EXPECT_EQ(j["cases"].size(), 20u);
  int total = 0;
  for (const char* k : {"Excellent", "Good", "Failed"}) total += j["rank_counts"][k].get<int>();
  EXPECT_EQ(total, 20);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"calibrate", "--output", path("c")}).code, 1);
  const CliResult bad = run_cli({"phantom", "--output", path("p"), "--dims", "10,10"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("dims"), std::string::npos);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}
