#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evrecon/event_core.hpp"
#include "evrecon/image.hpp"

namespace evrecon {

// ---- contrast thresholds ---------------------------------------------------

inline constexpr double kThresholdFloor = 0.01;
inline constexpr double kThresholdMean = 0.18;
inline constexpr double kThresholdStd = 0.03;

struct ContrastThresholds {
  double c_pos = kThresholdMean;
  double c_neg = kThresholdMean;

  ContrastThresholds() = default;
  ContrastThresholds(double pos, double neg);
};

double clamp_threshold(double raw);

/// Draws c_pos then c_neg independently from Normal(mean, std), clamped at 0.01.
ContrastThresholds sample_thresholds(std::mt19937_64& rng, double mean = kThresholdMean,
                                     double stddev = kThresholdStd);

// ---- scene and motion ------------------------------------------------------

/// Planar texture storing natural-log brightness (log of intensity in (0,1]).
struct PlanarScene {
  Image log_texture;
};

/// Band-limited value noise, intensities in [min_intensity, 1].
PlanarScene make_procedural_scene(int size, std::uint64_t seed, double min_intensity = 0.1);
/// Log of a grayscale image; intensities are floored at `min_intensity`.
PlanarScene scene_from_image(const Image& intensity, double min_intensity = 0.02);

/// 3x3 projective map, row-major, applied to (x, y, 1).
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }
  static Homography translation(double dx, double dy);
  Homography operator*(const Homography& rhs) const;
  double determinant() const;
  std::array<double, 2> apply(double x, double y) const;
};

struct TrajectoryBounds {
  double translation = 96.0;   // px/s (and px/s^2 for the quadratic term)
  double linear = 0.12;        // 1/s on the 2x2 affine part
  double perspective = 2e-4;   // 1/(px s)
};

/// h(t) = T_tex * P(t) * T_sensor^-1, each coefficient of P(t) a degree-2
/// polynomial in t with P(0) = I; maps sensor pixels to texture coordinates.
class MotionTrajectory {
 public:
  MotionTrajectory(Homography sensor_to_centered, Homography centered_to_texture,
                   std::array<double, 8> velocity, std::array<double, 8> acceleration,
                   double duration);
  /// Time-invariant map.
  static MotionTrajectory fixed(const Homography& h, double duration);

  double duration() const { return duration_; }
  Homography at(double t) const;

 private:
  Homography pre_;
  Homography post_;
  std::array<double, 8> velocity_{};
  std::array<double, 8> acceleration_{};
  double duration_ = 0.0;
};

/// Random motion; redraws until h(t) stays well-conditioned over [0, duration].
MotionTrajectory random_trajectory(const SensorGeometry& sensor, const Image& texture,
                                   double duration, const TrajectoryBounds& bounds,
                                   std::mt19937_64& rng);

// ---- rendering and event generation ----------------------------------------

struct SimConfig {
  SensorGeometry geometry{64, 64};
  double duration = 2.0;       // s
  double render_rate = 1000.0; // Hz, internal dense rendering
  double gt_rate = 500.0;      // Hz, exported ground truth
  double threshold_mean = kThresholdMean;
  double threshold_std = kThresholdStd;
  std::uint64_t seed = 0;
  int texture_size = 256;
  TrajectoryBounds bounds;

  void validate() const;
};

/// Log brightness at every sensor pixel: bilinear texture lookup at h * pixel,
/// edge-clamped.
Image render_log_image(const PlanarScene& scene, const Homography& h, const SensorGeometry& g);
/// exp(render_log_image) clamped to [0,1], timestamped at t.
Frame render_frame(const PlanarScene& scene, const MotionTrajectory& trajectory, double t,
                   const SensorGeometry& g);

/// Per-pixel threshold crossing detector on a piecewise-linear log-brightness
/// signal. Each advance() treats the previous and current log images as the
/// endpoints of a linear segment; crossing times are solved analytically and the
/// reference moves to the crossed level. A crossing exactly at the right end of
/// a segment belongs to that segment.
class EventSimulator {
 public:
  EventSimulator(SensorGeometry geometry, ContrastThresholds thresholds);

  void reset(const Image& log_image, double t_seconds);
  /// Appends the events of segment (last_t, t_seconds] to `out`, unsorted.
  void advance(const Image& log_image, double t_seconds, std::vector<Event>& out);

  const Image& reference() const { return reference_; }
  const ContrastThresholds& thresholds() const { return thresholds_; }

 private:
  SensorGeometry geometry_;
  ContrastThresholds thresholds_;
  Image reference_;
  Image last_;
  double last_t_ = 0.0;
  bool initialized_ = false;
};

/// Deterministic merge order (t, y, x, p).
void sort_events_canonical(std::vector<Event>& events);

struct SimulationResult {
  EventStream events;
  std::vector<Frame> frames;  // ground truth at gt_rate
};

SimulationResult generate_events(const PlanarScene& scene, const MotionTrajectory& trajectory,
                                 const ContrastThresholds& thresholds, const SimConfig& config);

// ---- datasets --------------------------------------------------------------

/// Procedural textures when `image_dir` is empty, otherwise PGM files from it.
struct TextureSource {
  std::filesystem::path image_dir;
  static TextureSource procedural() { return {}; }
};

struct SequenceEntry {
  std::string name;  // seq_%05d
  std::size_t event_count = 0;
  std::size_t frame_count = 0;
  ContrastThresholds thresholds;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  SensorGeometry geometry;
  std::vector<SequenceEntry> sequences;

  std::filesystem::path sequence_dir(std::size_t i) const { return root / sequences[i].name; }
};

/// Writes `count` sequences under `out_dir` plus manifest.txt; fresh thresholds
/// per sequence.
DatasetManifest generate_dataset(const SimConfig& config, const TextureSource& textures,
                                 std::size_t count, const std::filesystem::path& out_dir);
DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);

/// Per-sequence seed derived from the dataset seed and index.
std::uint64_t sequence_seed(std::uint64_t dataset_seed, std::size_t index);

}  // namespace evrecon
