#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "lsc/geometry.hpp"
#include "lsc/volume.hpp"

namespace lsc {

/// Raised for an invalid PhantomSpec; `field()` names the offending key.
class PhantomSpecError : public std::invalid_argument {
 public:
  PhantomSpecError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Two mirror-symmetric canal arcs in the z = 0 plane, centered at (+-c, 0, 0),
/// each wrapped in a bone shell, then moved by `skew`.
struct PhantomSpec {
  double major_radius = 3.0;     // R_c, mm
  double tube_radius = 0.6;      // r_c, mm
  double arc_span_deg = 240.0;   // the gap faces -y in canonical pose
  double half_separation = 30.0; // c, mm
  double shell_thickness = 1.0;  // bone wall around the lumen, mm

  float canal_intensity = 0.0f;
  float bone_intensity = 1500.0f;
  float background_intensity = -1000.0f;
  float noise_amplitude = 0.0f;  // additive uniform noise in [-a, a]

  Dims dims{160, 72, 72};
  std::array<float, 3> spacing{0.5f, 0.5f, 0.5f};
  RigidPose skew;
  std::uint64_t seed = 0;

  /// Throws PhantomSpecError naming the first violated field.
  void validate() const;

  /// Grid centered on the world origin.
  GridGeometry geometry() const;

  /// Smallest distance between the canal intensity and either neighbouring tissue intensity.
  double intensity_gap() const;

  std::string to_text() const;
  /// Applies `key=value` entries on top of the current values; unknown keys throw.
  void apply(const std::map<std::string, std::string>& kv);
};

struct Phantom {
  Volume volume;
  LabelMask mask;
  RigidPose pose;  // canonical -> world
};

/// Distance in mm from a canonical-frame point to the nearest canal centerline.
double canal_distance(const PhantomSpec& spec, const Vec3& canonical_point);

Phantom generate_phantom(const PhantomSpec& spec);

/// Counter-based uniform draw in [-1, 1) keyed on (seed, index).
double hashed_uniform(std::uint64_t seed, std::uint64_t index);

struct AugmentOptions {
  double max_rotation_deg = 5.0;
  double foreground_probability = 0.75;
  int jitter = 12;  // voxels around the chosen foreground voxel
};

struct TrainingPair {
  Cuboid<float> image;
  Cuboid<std::uint8_t> labels;
  std::array<double, 3> angles_deg{};
};

/// Cuboid at `offset`, rotated about the window center by the given Euler angles.
/// Intensities are resampled trilinearly (air fill), labels by nearest neighbour.
TrainingPair augment_window(const Volume& vol, const LabelMask& mask, const Index3& offset,
                            const std::array<double, 3>& angles_deg);

/// Foreground-biased random window with random rotation. Throws on an empty mask.
TrainingPair sample_training_pair(const Volume& vol, const LabelMask& mask, std::uint64_t seed,
                                  const AugmentOptions& options = {});

}  // namespace lsc
