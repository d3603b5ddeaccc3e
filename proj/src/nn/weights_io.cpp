#include "evrecon/nn/weights_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "evrecon/errors.hpp"

namespace evrecon::nn {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f32() { return std::bit_cast<float>(u32()); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw DataError("weight file truncated");
  }
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const unsigned char* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

// Shape of each serialized array, parallel to all_parameters().
std::vector<std::vector<std::uint32_t>> block_shapes(const NetworkWeights& w) {
  std::vector<std::vector<std::uint32_t>> shapes;
  auto conv = [&](const ConvParams& p) {
    const auto& s = p.kernel.shape();
    shapes.push_back({static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                      static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)});
    shapes.push_back({static_cast<std::uint32_t>(p.bias.size())});
  };
  auto bn = [&](const BatchNormParams& p) {
    for (int i = 0; i < 4; ++i) shapes.push_back({static_cast<std::uint32_t>(p.channels())});
  };
  for (const auto& e : w.encoders) conv(e);
  for (const auto& r : w.residuals) {
    conv(r.conv1);
    bn(r.bn1);
    conv(r.conv2);
    bn(r.bn2);
  }
  for (const auto& d : w.decoders) conv(d);
  conv(w.prediction);
  return shapes;
}

constexpr std::uint32_t kConfigFields = 7;

}  // namespace

std::vector<unsigned char> serialize_weights(const NetworkWeights& weights) {
  Writer out;
  out.raw("E2VW", 4);
  out.u32(kWeightsVersion);
  const NetConfig& c = weights.config;
  out.u32(kConfigFields);
  for (int v : {c.base_channels, c.encoders, c.residual_blocks, c.kernel, c.residual_kernel, c.bins,
                c.recurrent_frames}) {
    out.i32(v);
  }
  const auto arrays = all_parameters(weights);
  const auto shapes = block_shapes(weights);
  out.u32(static_cast<std::uint32_t>(arrays.size()));
  for (std::size_t b = 0; b < arrays.size(); ++b) {
    out.u32(static_cast<std::uint32_t>(shapes[b].size()));
    for (auto d : shapes[b]) out.u32(d);
    for (double v : arrays[b]) out.f32(v);
  }
  auto& bytes = out.bytes();
  out.u32(crc_of(bytes.data(), bytes.size()));
  return std::move(bytes);
}

NetworkWeights deserialize_weights(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "E2VW", 4) != 0) {
    throw DataError("not a weight file (bad magic)");
  }
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != crc_of(bytes.data(), body)) throw DataError("weight file corrupt (CRC mismatch)");

  Reader in(bytes.data() + 4, body - 4);
  const auto version = in.u32();
  if (version != kWeightsVersion) {
    throw DataError("unsupported weight file version " + std::to_string(version));
  }
  if (in.u32() != kConfigFields) throw DataError("weight file config block malformed");
  NetConfig c;
  c.base_channels = in.i32();
  c.encoders = in.i32();
  c.residual_blocks = in.i32();
  c.kernel = in.i32();
  c.residual_kernel = in.i32();
  c.bins = in.i32();
  c.recurrent_frames = in.i32();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("weight file config invalid: ") + e.what());
  }
  NetworkWeights w = zero_weights(c);
  const auto arrays = all_parameters(w);
  const auto shapes = block_shapes(w);
  if (in.u32() != arrays.size()) throw DataError("weight file block count does not match config");
  for (std::size_t b = 0; b < arrays.size(); ++b) {
    const auto rank = in.u32();
    if (rank != shapes[b].size()) throw DataError("weight block " + std::to_string(b) + " rank mismatch");
    for (auto d : shapes[b]) {
      if (in.u32() != d) throw DataError("weight block " + std::to_string(b) + " shape mismatch");
    }
    for (double& v : arrays[b]) v = in.f32();
  }
  return w;
}

void save_weights(const NetworkWeights& weights, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

NetworkWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

void require_compatible(const NetConfig& config, int bins, int recurrent_frames) {
  if (config.bins != bins || config.recurrent_frames != recurrent_frames) {
    throw ConfigError("network was trained with B=" + std::to_string(config.bins) +
                      ", K=" + std::to_string(config.recurrent_frames) + " but B=" +
                      std::to_string(bins) + ", K=" + std::to_string(recurrent_frames) +
                      " was requested");
  }
}

}  // namespace evrecon::nn
