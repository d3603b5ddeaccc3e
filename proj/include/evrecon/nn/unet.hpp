#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evrecon/nn/layers.hpp"

namespace evrecon::nn {

/// Recurrent UNet shape. Encoder i outputs base * 2^i channels at 1/2^(i+1)
/// resolution; decoder j consumes [previous, symmetric encoder output] and emits
/// base * 2^(E-2-j) channels; a 1x1 prediction conv and a sigmoid close it.
struct NetConfig {
  int base_channels = 64;
  int encoders = 4;
  int residual_blocks = 2;
  int kernel = 5;
  int residual_kernel = 3;
  int bins = 10;
  int recurrent_frames = 3;

  static NetConfig full() { return {}; }
  /// Test-sized network: 8 base channels, 2 encoders, 1 residual block.
  static NetConfig tiny(int bins, int recurrent_frames);

  int input_channels() const { return bins + recurrent_frames; }
  int encoder_channels(int i) const { return base_channels << i; }
  int bottleneck_channels() const { return encoder_channels(encoders - 1); }
  int decoder_in_channels(int j) const { return 2 * encoder_channels(encoders - 1 - j); }
  int decoder_out_channels(int j) const { return encoder_channels(encoders - 1 - j) / 2; }
  /// Spatial sizes are padded up to a multiple of this.
  int alignment() const { return 1 << encoders; }
  void validate() const;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct NetworkWeights {
  NetConfig config;
  std::vector<ConvParams> encoders;
  std::vector<ResidualParams> residuals;
  std::vector<ConvParams> decoders;
  ConvParams prediction;
};

/// Kaiming-uniform (fan-in) kernels, zero biases, BN scale 1 / shift 0.
NetworkWeights init_weights(const NetConfig& config, std::uint64_t seed);
/// All kernels, biases and BN affine terms zero; running variance 1.
NetworkWeights zero_weights(const NetConfig& config);

/// Trainable arrays in a fixed order (kernels, biases, BN scale/shift).
std::vector<std::span<double>> trainable_parameters(NetworkWeights& w);
std::vector<std::span<const double>> trainable_parameters(const NetworkWeights& w);
/// Trainable arrays plus BN running statistics, in serialization order.
std::vector<std::span<double>> all_parameters(NetworkWeights& w);
std::vector<std::span<const double>> all_parameters(const NetworkWeights& w);

struct UNetCache {
  int out_h = 0, out_w = 0;      // caller-visible size
  int padded_h = 0, padded_w = 0;
  Tensor4 padded_input;
  std::vector<Tensor4> encoder_pre;   // conv outputs before ReLU
  std::vector<Tensor4> encoder_out;
  std::vector<ResidualCache> residuals;
  std::vector<Tensor4> decoder_in;    // concatenated inputs
  std::vector<Tensor4> decoder_pre;
  Tensor4 decoder_last;               // input of the prediction conv
  Tensor4 prediction;                 // sigmoid output, padded size
};

/// Input (N, B+K, H, W) -> output (N, 1, H, W) in (0, 1). H and W are
/// reflect-padded (bottom/right) to a multiple of config.alignment() and the
/// output is cropped back. Train mode updates the BN running statistics.
Tensor4 unet_forward(const Tensor4& input, NetworkWeights& weights, Mode mode,
                     UNetCache* cache = nullptr);

/// Eval-mode forward pass; leaves the weights untouched.
Tensor4 unet_infer(const Tensor4& input, const NetworkWeights& weights);

struct UNetGrads {
  NetworkWeights params;  // same layout as the weights; running stats unused
  Tensor4 input;
};

UNetGrads unet_backward(const UNetCache& cache, const NetworkWeights& weights,
                        const Tensor4& grad_output);

}  // namespace evrecon::nn
