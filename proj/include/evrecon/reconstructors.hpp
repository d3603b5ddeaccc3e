#pragma once

#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evrecon/event_core.hpp"
#include "evrecon/image.hpp"
#include "evrecon/nn/unet.hpp"
#include "evrecon/tensorizer.hpp"

namespace evrecon {

/// Display offset for log states: the unknown initial image is taken as 0.5.
inline constexpr double kBaseIntensity = 0.5;
/// Threshold assumed by the integration baselines when the true one is unknown.
inline constexpr double kNominalThreshold = 0.18;
/// High-pass leak rate (rad/s), a 5 Hz cutoff.
inline constexpr double kDefaultHighpassAlpha = 2.0 * std::numbers::pi * 5.0;
inline constexpr int kBilateralDiameter = 5;
inline constexpr double kBilateralSigma = 25.0;

// ---- direct integration ----------------------------------------------------

struct IntegrationState {
  Image loglum;
  double c = kNominalThreshold;

  static IntegrationState zero(const SensorGeometry& g, double c = kNominalThreshold);
};

/// loglum[pixel] += p * c per event.
IntegrationState integrate(IntegrationState state, std::span<const Event> events);
void integrate_in_place(IntegrationState& state, std::span<const Event> events);

// ---- high-pass filter ------------------------------------------------------

/// Per-pixel leaky integrator: on each event the pixel decays by
/// exp(-alpha * dt) since its last update, then adds p * c.
struct HighpassState {
  Image loglum;
  std::vector<Timestamp> last_t;
  double alpha = kDefaultHighpassAlpha;
  double c = kNominalThreshold;

  static HighpassState zero(const SensorGeometry& g, double alpha = kDefaultHighpassAlpha,
                            double c = kNominalThreshold);
};

HighpassState highpass_step(HighpassState state, const Event& event);
void highpass_update(HighpassState& state, const Event& event);
/// Filter state decayed to time t (pixels updated after t are left as is).
Image highpass_value_at(const HighpassState& state, Timestamp t);

// ---- display ---------------------------------------------------------------

/// clamp(exp(loglum + log 0.5), 0, 1).
Frame state_to_frame(const Image& loglum, Timestamp t);
Frame state_to_frame(const IntegrationState& state, Timestamp t);
Frame state_to_frame(const HighpassState& state, Timestamp t);

/// Spatial Gaussian sigma, range Gaussian sigma / 255 on [0,1] intensities,
/// edge-replicated borders.
Image bilateral_filter(const Image& image, int diameter = kBilateralDiameter,
                       double sigma = kBilateralSigma);

// ---- learned reconstruction ------------------------------------------------

struct RecurrentState {
  std::vector<Image> frames;  // most recent last
};

/// K frames of constant 0.5.
RecurrentState reset_state(const SensorGeometry& g, int k);

std::pair<Frame, RecurrentState> e2v_step(RecurrentState state, const EventTensor& tensor,
                                          const nn::NetworkWeights& weights, Timestamp t);

// ---- whole-stream drivers --------------------------------------------------

enum class Method { integrate, highpass, e2v };

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct ReconstructionOptions {
  Method method = Method::integrate;
  std::size_t window_size = kDefaultWindowSize;  // output cadence and network window
  int bins = kDefaultBins;
  double threshold = kNominalThreshold;
  double alpha = kDefaultHighpassAlpha;
  bool bilateral = true;  // post-filter high-pass output
  const nn::NetworkWeights* weights = nullptr;
  /// Baselines only: emit frames at these times instead of at window ends.
  std::optional<std::vector<Timestamp>> frame_times;
};

/// One frame per window of `window_size` events, stamped with the window's last
/// timestamp.
std::vector<Frame> reconstruct(const EventStream& stream, const ReconstructionOptions& options);

}  // namespace evrecon
