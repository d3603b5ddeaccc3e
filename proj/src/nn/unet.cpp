#include "evrecon/nn/unet.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "evrecon/errors.hpp"

namespace evrecon::nn {

namespace {

constexpr int kStride = 2;

int encoder_padding(const NetConfig& c) { return c.kernel / 2; }
// Makes the transposed conv exactly double the size for odd kernels.
int decoder_output_padding() { return 1; }

ConvParams make_conv(int out_c, int in_c, int k, double bound, std::mt19937_64* rng) {
  ConvParams p{Tensor4(out_c, in_c, k, k), std::vector<double>(out_c, 0.0)};
  if (rng) {
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (double& v : p.kernel.values()) v = uni(*rng);
  }
  return p;
}

// Kernels stored (in, out, k, k).
ConvParams make_transposed(int in_c, int out_c, int k, double bound, std::mt19937_64* rng) {
  ConvParams p{Tensor4(in_c, out_c, k, k), std::vector<double>(out_c, 0.0)};
  if (rng) {
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (double& v : p.kernel.values()) v = uni(*rng);
  }
  return p;
}

double kaiming_bound(double fan_in) { return std::sqrt(6.0 / fan_in); }

NetworkWeights build(const NetConfig& cfg, std::mt19937_64* rng) {
  cfg.validate();
  NetworkWeights w;
  w.config = cfg;
  const int k = cfg.kernel, rk = cfg.residual_kernel;
  int in_c = cfg.input_channels();
  for (int i = 0; i < cfg.encoders; ++i) {
    const int out_c = cfg.encoder_channels(i);
    w.encoders.push_back(make_conv(out_c, in_c, k, kaiming_bound(in_c * k * k), rng));
    in_c = out_c;
  }
  const int bc = cfg.bottleneck_channels();
  for (int r = 0; r < cfg.residual_blocks; ++r) {
    ResidualParams rp;
    rp.conv1 = make_conv(bc, bc, rk, kaiming_bound(bc * rk * rk), rng);
    rp.bn1 = BatchNormParams::identity(bc);
    rp.conv2 = make_conv(bc, bc, rk, kaiming_bound(bc * rk * rk), rng);
    rp.bn2 = BatchNormParams::identity(bc);
    w.residuals.push_back(std::move(rp));
  }
  for (int j = 0; j < cfg.encoders; ++j) {
    const int dec_in = cfg.decoder_in_channels(j);
    const double fan_in = static_cast<double>(dec_in) * k * k / (kStride * kStride);
    w.decoders.push_back(make_transposed(dec_in, cfg.decoder_out_channels(j), k,
                                         kaiming_bound(fan_in), rng));
  }
  const int last = cfg.decoder_out_channels(cfg.encoders - 1);
  w.prediction = make_conv(1, last, 1, kaiming_bound(last), rng);
  return w;
}

template <typename W, typename Span>
std::vector<Span> collect(W& w, bool with_running) {
  std::vector<Span> out;
  auto conv = [&](auto& p) {
    out.emplace_back(p.kernel.values());
    out.emplace_back(p.bias);
  };
  auto bn = [&](auto& p) {
    out.emplace_back(p.scale);
    out.emplace_back(p.shift);
    if (with_running) {
      out.emplace_back(p.running_mean);
      out.emplace_back(p.running_var);
    }
  };
  for (auto& e : w.encoders) conv(e);
  for (auto& r : w.residuals) {
    conv(r.conv1);
    bn(r.bn1);
    conv(r.conv2);
    bn(r.bn2);
  }
  for (auto& d : w.decoders) conv(d);
  conv(w.prediction);
  return out;
}

}  // namespace

NetConfig NetConfig::tiny(int bins, int recurrent_frames) {
  NetConfig c;
  c.base_channels = 8;
  c.encoders = 2;
  c.residual_blocks = 1;
  c.bins = bins;
  c.recurrent_frames = recurrent_frames;
  return c;
}

void NetConfig::validate() const {
  if (encoders < 1) throw std::invalid_argument("network needs at least one encoder");
  if (base_channels < 2 || base_channels % 2 != 0) {
    throw std::invalid_argument("base_channels must be even and >= 2");
  }
  if (residual_blocks < 0) throw std::invalid_argument("residual_blocks must be >= 0");
  if (kernel < 1 || kernel % 2 == 0 || residual_kernel < 1 || residual_kernel % 2 == 0) {
    throw std::invalid_argument("kernel sizes must be odd");
  }
  if (bins < 1 || recurrent_frames < 0) throw std::invalid_argument("need B >= 1 and K >= 0");
}

NetworkWeights init_weights(const NetConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return build(config, &rng);
}

NetworkWeights zero_weights(const NetConfig& config) {
  NetworkWeights w = build(config, nullptr);
  for (auto& r : w.residuals) {
    std::fill(r.bn1.scale.begin(), r.bn1.scale.end(), 0.0);
    std::fill(r.bn2.scale.begin(), r.bn2.scale.end(), 0.0);
  }
  return w;
}

std::vector<std::span<double>> trainable_parameters(NetworkWeights& w) {
  return collect<NetworkWeights, std::span<double>>(w, false);
}
std::vector<std::span<const double>> trainable_parameters(const NetworkWeights& w) {
  return collect<const NetworkWeights, std::span<const double>>(w, false);
}
std::vector<std::span<double>> all_parameters(NetworkWeights& w) {
  return collect<NetworkWeights, std::span<double>>(w, true);
}
std::vector<std::span<const double>> all_parameters(const NetworkWeights& w) {
  return collect<const NetworkWeights, std::span<const double>>(w, true);
}

Tensor4 unet_forward(const Tensor4& input, NetworkWeights& weights, Mode mode, UNetCache* cache) {
  const NetConfig& cfg = weights.config;
  if (input.c() != cfg.input_channels()) {
    throw ShapeError("unet: input has " + std::to_string(input.c()) + " channels, network expects " +
                     std::to_string(cfg.input_channels()) + " (B + K)");
  }
  const int align = cfg.alignment();
  const int ph = (input.h() + align - 1) / align * align;
  const int pw = (input.w() + align - 1) / align * align;
  const int pad = encoder_padding(cfg);

  UNetCache local;
  UNetCache& c = cache ? *cache : local;
  c = UNetCache{};
  c.out_h = input.h();
  c.out_w = input.w();
  c.padded_h = ph;
  c.padded_w = pw;
  c.padded_input = reflect_pad(input, ph, pw);

  const Tensor4* x = &c.padded_input;
  for (int i = 0; i < cfg.encoders; ++i) {
    c.encoder_pre.push_back(conv2d(*x, weights.encoders[i], kStride, pad));
    c.encoder_out.push_back(relu(c.encoder_pre.back()));
    x = &c.encoder_out.back();
  }
  Tensor4 h = *x;
  c.residuals.resize(weights.residuals.size());
  for (std::size_t r = 0; r < weights.residuals.size(); ++r) {
    h = residual_block(h, weights.residuals[r], mode, &c.residuals[r]);
  }
  for (int j = 0; j < cfg.encoders; ++j) {
    c.decoder_in.push_back(concat_channels(h, c.encoder_out[cfg.encoders - 1 - j]));
    c.decoder_pre.push_back(
        transposed_conv2d(c.decoder_in.back(), weights.decoders[j], kStride, pad, decoder_output_padding()));
    h = relu(c.decoder_pre.back());
  }
  c.decoder_last = std::move(h);
  c.prediction = sigmoid(conv2d(c.decoder_last, weights.prediction, 1, 0));
  return crop(c.prediction, c.out_h, c.out_w);
}

Tensor4 unet_infer(const Tensor4& input, const NetworkWeights& weights) {
  // Eval mode only reads the running statistics.
  return unet_forward(input, const_cast<NetworkWeights&>(weights), Mode::eval);
}

UNetGrads unet_backward(const UNetCache& c, const NetworkWeights& weights,
                        const Tensor4& grad_output) {
  const NetConfig& cfg = weights.config;
  require_shape(grad_output, Shape4{c.padded_input.n(), 1, c.out_h, c.out_w}, "unet_backward");
  const int pad = encoder_padding(cfg);

  UNetGrads g;
  g.params = zero_weights(cfg);

  Tensor4 grad = sigmoid_backward(c.prediction, crop_backward(grad_output, c.padded_h, c.padded_w));
  {
    ConvGrads pg = conv2d_backward(c.decoder_last, weights.prediction, 1, 0, grad);
    g.params.prediction = ConvParams{std::move(pg.kernel), std::move(pg.bias)};
    grad = std::move(pg.input);
  }
  std::vector<Tensor4> skip_grads(cfg.encoders);
  for (int j = cfg.encoders - 1; j >= 0; --j) {
    grad = relu_backward(c.decoder_pre[j], grad);
    ConvGrads dg = transposed_conv2d_backward(c.decoder_in[j], weights.decoders[j], kStride, pad, grad);
    g.params.decoders[j] = ConvParams{std::move(dg.kernel), std::move(dg.bias)};
    const int skip = cfg.encoders - 1 - j;
    Tensor4 from_prev, from_skip;
    split_channels(dg.input, c.decoder_in[j].c() - c.encoder_out[skip].c(), from_prev, from_skip);
    skip_grads[skip] = std::move(from_skip);
    grad = std::move(from_prev);
  }
  for (int r = static_cast<int>(weights.residuals.size()) - 1; r >= 0; --r) {
    ResidualGrads rg = residual_block_backward(c.residuals[r], weights.residuals[r], grad);
    auto& dst = g.params.residuals[r];
    dst.conv1 = std::move(rg.params.conv1);
    dst.conv2 = std::move(rg.params.conv2);
    dst.bn1.scale = std::move(rg.params.bn1.scale);
    dst.bn1.shift = std::move(rg.params.bn1.shift);
    dst.bn2.scale = std::move(rg.params.bn2.scale);
    dst.bn2.shift = std::move(rg.params.bn2.shift);
    grad = std::move(rg.input);
  }
  for (int i = cfg.encoders - 1; i >= 0; --i) {
    grad += skip_grads[i];
    grad = relu_backward(c.encoder_pre[i], grad);
    const Tensor4& in = i == 0 ? c.padded_input : c.encoder_out[i - 1];
    ConvGrads eg = conv2d_backward(in, weights.encoders[i], kStride, pad, grad);
    g.params.encoders[i] = ConvParams{std::move(eg.kernel), std::move(eg.bias)};
    grad = std::move(eg.input);
  }
  g.input = reflect_pad_backward(grad, c.out_h, c.out_w);
  return g;
}

}  // namespace evrecon::nn
