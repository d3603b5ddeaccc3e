#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "evrecon/event_core.hpp"
#include "evrecon/image.hpp"

namespace evrecon {

inline constexpr std::size_t kDefaultWindowSize = 25000;
inline constexpr int kDefaultBins = 10;

/// Channel-major stack of H x W planes.
class ChannelStack {
 public:
  ChannelStack() = default;
  ChannelStack(int channels, SensorGeometry geometry);

  int channels() const { return channels_; }
  const SensorGeometry& geometry() const { return geometry_; }
  std::size_t plane_size() const { return geometry_.pixel_count(); }

  std::span<double> plane(int c) { return {values_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(int c) const {
    return {values_.data() + c * plane_size(), plane_size()};
  }
  double& at(int c, int x, int y) { return values_[c * plane_size() + y * geometry_.width + x]; }
  double at(int c, int x, int y) const {
    return values_[c * plane_size() + y * geometry_.width + x];
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double sum() const;
  friend bool operator==(const ChannelStack&, const ChannelStack&) = default;

 private:
  int channels_ = 0;
  SensorGeometry geometry_{1, 1};
  std::vector<double> values_;
};

/// B x H x W voxel grid of signed event mass.
struct EventTensor {
  ChannelStack grid;
  int bins() const { return grid.channels(); }
};

/// (B + K) x H x W: the B event bins followed by K previous frames, most recent last.
struct NetworkInput {
  ChannelStack stack;
  int bins = 0;
  int frames = 0;
};

/// Each event adds p * max(0, 1 - |n - t*|) to bins floor(t*) and floor(t*) + 1
/// of its own pixel, with t* = (B - 1)(t - t0) / dT. A zero-duration window puts
/// every event in bin 0.
EventTensor voxelize(const EventWindow& window, int bins, const SensorGeometry& geometry);

NetworkInput stack_input(const EventTensor& tensor, std::span<const Frame> previous);
NetworkInput stack_input(const EventTensor& tensor, std::span<const Image> previous);

// Debug dump: u16 B, u16 H, u16 W, then row-major little-endian float32.
void write_tensor_dump(std::ostream& out, const EventTensor& tensor);
EventTensor read_tensor_dump(std::istream& in);

}  // namespace evrecon
