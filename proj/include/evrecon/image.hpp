#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "evrecon/event_core.hpp"

namespace evrecon {

/// Row-major single-channel image of doubles.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  SensorGeometry geometry() const { return {width_, height_}; }

  double& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Intensity frame in [0,1] with a timestamp in microseconds.
struct Frame {
  Image image;
  Timestamp t = 0;
};

// 8-bit binary PGM (P5); value v encodes v/255. Reader also accepts ASCII P2.
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);

/// Writes frames as `frames/frame_%06d.pgm` plus `timestamps.txt` under `dir`.
void write_frame_sequence(const std::filesystem::path& dir, std::span<const Frame> frames);
std::vector<Frame> read_frame_sequence(const std::filesystem::path& dir);

}  // namespace evrecon
