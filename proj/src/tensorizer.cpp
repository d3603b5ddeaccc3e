#include "evrecon/tensorizer.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "evrecon/errors.hpp"

namespace evrecon {

ChannelStack::ChannelStack(int channels, SensorGeometry geometry)
    : channels_(channels), geometry_(geometry),
      values_(static_cast<std::size_t>(std::max(channels, 0)) * geometry.pixel_count(), 0.0) {
  if (channels < 0) throw ShapeError("negative channel count");
}

double ChannelStack::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

// Weights are accumulated as 32.32 fixed point so each event deposits exactly
// one unit of mass and the result is independent of event order.
namespace {
constexpr double kFixedOne = 4294967296.0;  // 2^32
}

EventTensor voxelize(const EventWindow& window, int bins, const SensorGeometry& geometry) {
  if (bins < 1) throw std::invalid_argument("bin count must be >= 1");
  const std::size_t plane = geometry.pixel_count();
  std::vector<std::int64_t> acc(static_cast<std::size_t>(bins) * plane, 0);
  const Timestamp t0 = window.t0();
  const double span = static_cast<double>(window.duration_us());
  const double last_bin = bins - 1;
  for (const Event& e : window.events()) {
    if (!geometry.contains(e.x, e.y)) {
      throw DataError("event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                      ") outside tensor geometry");
    }
    const double ts = span > 0.0 ? last_bin * static_cast<double>(e.t - t0) / span : 0.0;
    const auto lower = static_cast<int>(ts);
    const auto upper_w = static_cast<std::int64_t>(std::llround((ts - lower) * kFixedOne));
    const auto lower_w = static_cast<std::int64_t>(kFixedOne) - upper_w;
    const std::size_t pixel = static_cast<std::size_t>(e.y) * geometry.width + e.x;
    const std::int64_t p = e.p;
    acc[lower * plane + pixel] += p * lower_w;
    if (upper_w != 0) acc[(lower + 1) * plane + pixel] += p * upper_w;
  }
  EventTensor tensor{ChannelStack(bins, geometry)};
  auto values = tensor.grid.values();
  for (std::size_t i = 0; i < acc.size(); ++i) values[i] = static_cast<double>(acc[i]) / kFixedOne;
  return tensor;
}

namespace {

template <typename Get>
NetworkInput stack_impl(const EventTensor& tensor, std::size_t count, Get&& get) {
  const auto& g = tensor.grid.geometry();
  const int b = tensor.bins();
  NetworkInput input{ChannelStack(b + static_cast<int>(count), g), b, static_cast<int>(count)};
  std::copy(tensor.grid.values().begin(), tensor.grid.values().end(),
            input.stack.values().begin());
  for (std::size_t k = 0; k < count; ++k) {
    const Image& img = get(k);
    if (img.width() != g.width || img.height() != g.height) {
      throw ShapeError("previous frame " + std::to_string(k) + " does not match tensor geometry");
    }
    auto dst = input.stack.plane(b + static_cast<int>(k));
    std::copy(img.values().begin(), img.values().end(), dst.begin());
  }
  return input;
}

}  // namespace

NetworkInput stack_input(const EventTensor& tensor, std::span<const Frame> previous) {
  return stack_impl(tensor, previous.size(), [&](std::size_t k) -> const Image& {
    return previous[k].image;
  });
}

NetworkInput stack_input(const EventTensor& tensor, std::span<const Image> previous) {
  return stack_impl(tensor, previous.size(),
                    [&](std::size_t k) -> const Image& { return previous[k]; });
}

void write_tensor_dump(std::ostream& out, const EventTensor& tensor) {
  const auto& g = tensor.grid.geometry();
  auto put16 = [&](int v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                                static_cast<unsigned char>((v >> 8) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 2);
  };
  put16(tensor.bins());
  put16(g.height);
  put16(g.width);
  for (double v : tensor.grid.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const unsigned char b[4] = {static_cast<unsigned char>(bits & 0xFF),
                                static_cast<unsigned char>((bits >> 8) & 0xFF),
                                static_cast<unsigned char>((bits >> 16) & 0xFF),
                                static_cast<unsigned char>((bits >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!out) throw DataError("failed writing tensor dump");
}

EventTensor read_tensor_dump(std::istream& in) {
  unsigned char hdr[6];
  if (!in.read(reinterpret_cast<char*>(hdr), 6)) throw DataError("tensor dump too short");
  const int b = hdr[0] | (hdr[1] << 8);
  const int h = hdr[2] | (hdr[3] << 8);
  const int w = hdr[4] | (hdr[5] << 8);
  if (b < 1 || h < 1 || w < 1) throw DataError("bad tensor dump header");
  EventTensor tensor{ChannelStack(b, SensorGeometry(w, h))};
  for (double& v : tensor.grid.values()) {
    unsigned char x[4];
    if (!in.read(reinterpret_cast<char*>(x), 4)) throw DataError("tensor dump truncated");
    const std::uint32_t bits = x[0] | (x[1] << 8) | (x[2] << 16) | (std::uint32_t{x[3]} << 24);
    v = std::bit_cast<float>(bits);
  }
  return tensor;
}

}  // namespace evrecon
