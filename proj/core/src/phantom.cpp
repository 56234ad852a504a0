#include "lsc/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "lsc/resample.hpp"

namespace lsc {
namespace {

constexpr double kPi = std::numbers::pi;

// Distance from a canonical point to the canal arc centered at (+c, 0, 0).
// The left canal is handled by mirroring x, which makes the scene exactly
// symmetric in floating point.
double right_arc_distance(const PhantomSpec& s, const Vec3& q) {
  const double vx = q.x() - s.half_separation;
  const double vy = q.y();
  const double radial = std::hypot(vx, vy);
  const double gap = deg_to_rad(360.0 - s.arc_span_deg);
  if (radial == 0.0) return std::hypot(s.major_radius, q.z());

  // Angular distance from the gap center at -90 degrees.
  double phi = std::atan2(vy, vx) + kPi / 2.0;
  phi = std::abs(std::remainder(phi, 2.0 * kPi));
  if (phi >= gap / 2.0) return std::hypot(radial - s.major_radius, q.z());

  double best = std::numeric_limits<double>::infinity();
  for (double sign : {-1.0, 1.0}) {
    const double theta = -kPi / 2.0 + sign * gap / 2.0;
    const Vec3 end(s.half_separation + s.major_radius * std::cos(theta),
                   s.major_radius * std::sin(theta), 0.0);
    best = std::min(best, (q - end).norm());
  }
  return best;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string join3(double a, double b, double c) {
  std::ostringstream os;
  os << std::setprecision(17) << a << ',' << b << ',' << c;
  return os.str();
}

std::vector<double> parse_list(const std::string& key, const std::string& text, std::size_t n) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw PhantomSpecError(key, "cannot parse '" + item + "' as a number");
    }
  }
  if (out.size() != n) {
    throw PhantomSpecError(key, "expected " + std::to_string(n) + " comma-separated values");
  }
  return out;
}

double parse_one(const std::string& key, const std::string& text) {
  return parse_list(key, text, 1)[0];
}

}  // namespace

GridGeometry PhantomSpec::geometry() const {
  GridGeometry g;
  g.dims = dims;
  g.spacing = spacing;
  for (int a = 0; a < 3; ++a) {
    g.origin[a] = static_cast<float>(-0.5 * double(dims[a] - 1) * double(spacing[a]));
  }
  return g;
}

double PhantomSpec::intensity_gap() const {
  return std::min(std::abs(double(canal_intensity) - bone_intensity),
                  std::abs(double(canal_intensity) - background_intensity));
}

void PhantomSpec::validate() const {
  if (!(tube_radius > 0.0)) throw PhantomSpecError("tube_radius", "must be > 0");
  if (!(major_radius > tube_radius)) throw PhantomSpecError("major_radius", "must exceed tube_radius");
  if (!(arc_span_deg > 0.0 && arc_span_deg <= 360.0)) {
    throw PhantomSpecError("arc_span", "must lie in (0, 360]");
  }
  if (!(half_separation > major_radius)) {
    throw PhantomSpecError("half_separation", "must exceed major_radius");
  }
  if (!(shell_thickness >= 0.0)) throw PhantomSpecError("shell_thickness", "must be >= 0");
  if (!(noise_amplitude >= 0.0f)) throw PhantomSpecError("noise", "must be >= 0");
  if (!skew.is_valid(1e-9)) throw PhantomSpecError("skew", "rotation must be orthonormal with det +1");
  try {
    geometry().validate();
  } catch (const std::invalid_argument& e) {
    throw PhantomSpecError("dims", e.what());
  }

  // Both skewed arcs, inflated by 3 r_c (tube plus 2 r_c margin), must stay inside the grid.
  const GridGeometry g = geometry();
  const Vec3 lo = g.world(Vec3::Zero());
  const Vec3 hi = g.world(Vec3(g.dims.nx - 1, g.dims.ny - 1, g.dims.nz - 1));
  const double margin = 3.0 * tube_radius;
  const double gap = deg_to_rad(360.0 - arc_span_deg);
  for (int i = 0; i <= 720; ++i) {
    const double theta = -kPi / 2.0 + gap / 2.0 + deg_to_rad(arc_span_deg) * i / 720.0;
    for (double side : {-1.0, 1.0}) {
      const Vec3 q(side * (half_separation + major_radius * std::cos(theta)),
                   major_radius * std::sin(theta), 0.0);
      const Vec3 p = skew.apply(q);
      for (int a = 0; a < 3; ++a) {
        if (p[a] - margin < lo[a] || p[a] + margin > hi[a]) {
          throw PhantomSpecError("dims", "skewed canals are clipped by the volume bounds");
        }
      }
    }
  }
}

std::string PhantomSpec::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "major_radius=" << major_radius << '\n';
  os << "tube_radius=" << tube_radius << '\n';
  os << "arc_span=" << arc_span_deg << '\n';
  os << "half_separation=" << half_separation << '\n';
  os << "shell_thickness=" << shell_thickness << '\n';
  os << "canal_intensity=" << canal_intensity << '\n';
  os << "bone_intensity=" << bone_intensity << '\n';
  os << "background_intensity=" << background_intensity << '\n';
  os << "noise=" << noise_amplitude << '\n';
  os << "dims=" << dims.nx << ',' << dims.ny << ',' << dims.nz << '\n';
  os << "spacing=" << join3(spacing[0], spacing[1], spacing[2]) << '\n';
  os << "skew_rotation=";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << skew.rotation(r, c) << ((r == 2 && c == 2) ? '\n' : ',');
  }
  os << "skew_translation="
     << join3(skew.translation.x(), skew.translation.y(), skew.translation.z()) << '\n';
  os << "seed=" << seed << '\n';
  return os.str();
}

void PhantomSpec::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "major_radius") major_radius = parse_one(key, value);
    else if (key == "tube_radius") tube_radius = parse_one(key, value);
    else if (key == "arc_span") arc_span_deg = parse_one(key, value);
    else if (key == "half_separation") half_separation = parse_one(key, value);
    else if (key == "shell_thickness") shell_thickness = parse_one(key, value);
    else if (key == "canal_intensity") canal_intensity = float(parse_one(key, value));
    else if (key == "bone_intensity") bone_intensity = float(parse_one(key, value));
    else if (key == "background_intensity") background_intensity = float(parse_one(key, value));
    else if (key == "noise") noise_amplitude = float(parse_one(key, value));
    else if (key == "dims") {
      const auto v = parse_list(key, value, 3);
      for (double d : v) {
        if (d < 1 || d != std::floor(d)) throw PhantomSpecError(key, "must be positive integers");
      }
      dims = {std::uint32_t(v[0]), std::uint32_t(v[1]), std::uint32_t(v[2])};
    } else if (key == "spacing") {
      const auto v = parse_list(key, value, 3);
      spacing = {float(v[0]), float(v[1]), float(v[2])};
    } else if (key == "skew_rotation") {
      const auto v = parse_list(key, value, 9);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) skew.rotation(r, c) = v[3 * r + c];
    } else if (key == "skew_euler") {
      const auto v = parse_list(key, value, 3);
      skew.rotation = rotation_from_euler_deg(v[0], v[1], v[2]);
    } else if (key == "skew_translation") {
      const auto v = parse_list(key, value, 3);
      skew.translation = Vec3(v[0], v[1], v[2]);
    } else if (key == "seed") {
      seed = static_cast<std::uint64_t>(std::stoull(value));
    } else {
      throw PhantomSpecError(key, "unknown phantom key");
    }
  }
}

double canal_distance(const PhantomSpec& spec, const Vec3& q) {
  const Vec3 mirrored(-q.x(), q.y(), q.z());
  return std::min(right_arc_distance(spec, q), right_arc_distance(spec, mirrored));
}

double hashed_uniform(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ULL));
  return double(h >> 11) * 0x1.0p-52 - 1.0;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const GridGeometry g = spec.geometry();
  const RigidPose world_to_canonical = spec.skew.inverse();
  const double shell = spec.tube_radius + spec.shell_thickness;

  std::vector<float> intensities(g.dims.count());
  std::vector<std::uint8_t> labels(g.dims.count(), 0);
  for (std::uint32_t z = 0; z < g.dims.nz; ++z) {
    for (std::uint32_t y = 0; y < g.dims.ny; ++y) {
      for (std::uint32_t x = 0; x < g.dims.nx; ++x) {
        const std::size_t i = g.linear(x, y, z);
        const Vec3 q = world_to_canonical.apply(g.world(Vec3(x, y, z)));
        const double d = canal_distance(spec, q);
        float value = spec.background_intensity;
        if (d <= spec.tube_radius) {
          value = spec.canal_intensity;
          labels[i] = 1;
        } else if (d <= shell) {
          value = spec.bone_intensity;
        }
        if (spec.noise_amplitude > 0.0f) {
          value += static_cast<float>(spec.noise_amplitude * hashed_uniform(spec.seed, i));
        }
        intensities[i] = value;
      }
    }
  }
  return {Volume(g, std::move(intensities)), LabelMask(g, std::move(labels)), spec.skew};
}

TrainingPair augment_window(const Volume& vol, const LabelMask& mask, const Index3& offset,
                            const std::array<double, 3>& angles_deg) {
  if (!(vol.geometry() == mask.geometry())) {
    throw std::invalid_argument("volume and mask grids differ");
  }
  TrainingPair pair;
  pair.angles_deg = angles_deg;
  if (angles_deg == std::array<double, 3>{0.0, 0.0, 0.0}) {
    pair.image = extract_cuboid(vol, offset);
    pair.labels = extract_cuboid<std::uint8_t>(mask, offset);
    return pair;
  }
  // Bounds check through the unrotated window.
  (void)extract_cuboid(vol, offset);

  const GridGeometry& g = vol.geometry();
  const double half = 0.5 * (kCuboidSide - 1);
  const Vec3 center = g.world(Vec3(offset.x + half, offset.y + half, offset.z + half));
  const Mat3 rot = rotation_from_euler_deg(angles_deg[0], angles_deg[1], angles_deg[2]);
  const float air = min_value(vol);

  const std::size_t n = std::size_t{kCuboidSide} * kCuboidSide * kCuboidSide;
  pair.image.offset = pair.labels.offset = offset;
  pair.image.values.resize(n);
  pair.labels.values.resize(n);
  std::size_t i = 0;
  for (int z = 0; z < kCuboidSide; ++z) {
    for (int y = 0; y < kCuboidSide; ++y) {
      for (int x = 0; x < kCuboidSide; ++x, ++i) {
        const Vec3 p = g.world(Vec3(offset.x + x, offset.y + y, offset.z + z));
        const Vec3 src = g.index(center + rot * (p - center));
        pair.image.values[i] = sample_trilinear(vol, src, air);
        pair.labels.values[i] = sample_nearest(mask, src);
      }
    }
  }
  return pair;
}

TrainingPair sample_training_pair(const Volume& vol, const LabelMask& mask, std::uint64_t seed,
                                  const AugmentOptions& options) {
  std::vector<std::size_t> foreground;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) foreground.push_back(i);
  }
  if (foreground.empty()) throw std::invalid_argument("sample_training_pair: mask is empty");

  const Dims& d = vol.dims();
  for (int a = 0; a < 3; ++a) {
    if (d[a] < std::uint32_t{kCuboidSide}) {
      throw std::invalid_argument("sample_training_pair: volume smaller than 48 voxels on an axis");
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<std::int64_t, 3> off{};
  if (unit(rng) < options.foreground_probability) {
    std::uniform_int_distribution<std::size_t> pick(0, foreground.size() - 1);
    const Index3 c = mask.geometry().index_of(foreground[pick(rng)]);
    std::uniform_int_distribution<int> jitter(-options.jitter, options.jitter);
    const std::array<std::int64_t, 3> cv{c.x, c.y, c.z};
    for (int a = 0; a < 3; ++a) {
      off[a] = std::clamp<std::int64_t>(cv[a] - kCuboidSide / 2 + jitter(rng), 0,
                                        std::int64_t{d[a]} - kCuboidSide);
    }
  } else {
    for (int a = 0; a < 3; ++a) {
      std::uniform_int_distribution<std::int64_t> pos(0, std::int64_t{d[a]} - kCuboidSide);
      off[a] = pos(rng);
    }
  }
  std::array<double, 3> angles{};
  std::uniform_real_distribution<double> angle(-options.max_rotation_deg, options.max_rotation_deg);
  for (double& a : angles) a = options.max_rotation_deg > 0.0 ? angle(rng) : 0.0;
  return augment_window(vol, mask, {off[0], off[1], off[2]}, angles);
}

}  // namespace lsc
