#pragma once

#include <vector>

#include "evrecon/nn/tensor.hpp"

namespace evrecon::nn {

enum class Mode { train, eval };

/// Conv kernels are (out, in, k, k); transposed-conv kernels are (in, out, k, k),
/// i.e. the kernel of the conv2d whose adjoint they compute.
struct ConvParams {
  Tensor4 kernel;
  std::vector<double> bias;

  int kernel_size() const { return kernel.h(); }
};

struct ConvGrads {
  Tensor4 input;
  Tensor4 kernel;
  std::vector<double> bias;
};

inline int conv_output_size(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }
inline int transposed_output_size(int in, int k, int stride, int pad, int output_pad) {
  return (in - 1) * stride - 2 * pad + k + output_pad;
}

/// Cross-correlation with zero padding.
Tensor4 conv2d(const Tensor4& x, const ConvParams& p, int stride, int padding);
ConvGrads conv2d_backward(const Tensor4& x, const ConvParams& p, int stride, int padding,
                          const Tensor4& grad_out);

/// Adjoint of conv2d's linear part (plus bias).
Tensor4 transposed_conv2d(const Tensor4& x, const ConvParams& p, int stride, int padding,
                          int output_padding);
ConvGrads transposed_conv2d_backward(const Tensor4& x, const ConvParams& p, int stride,
                                     int padding, const Tensor4& grad_out);

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct BatchNormParams {
  std::vector<double> scale;
  std::vector<double> shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  static BatchNormParams identity(int channels);
  int channels() const { return static_cast<int>(scale.size()); }
};

struct BatchNormCache {
  Mode mode = Mode::train;
  Tensor4 xhat;
  std::vector<double> inv_std;
};

struct BatchNormGrads {
  Tensor4 input;
  std::vector<double> scale;
  std::vector<double> shift;
};

/// Train mode normalizes with batch statistics (biased variance) and folds them
/// into the running stats (unbiased variance, momentum 0.1); eval mode uses the
/// running stats.
Tensor4 batch_norm(const Tensor4& x, BatchNormParams& p, Mode mode, BatchNormCache* cache = nullptr);
BatchNormGrads batch_norm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                   const Tensor4& grad_out);

/// ReLU(x + BN(conv(ReLU(BN(conv(x)))))), 'same' padding.
struct ResidualParams {
  ConvParams conv1;
  BatchNormParams bn1;
  ConvParams conv2;
  BatchNormParams bn2;
};

struct ResidualCache {
  Tensor4 input;
  Tensor4 pre_act1;  // BN1 output
  Tensor4 act1;
  Tensor4 pre_out;   // x + BN2 output
  BatchNormCache bn1;
  BatchNormCache bn2;
};

struct ResidualGrads {
  Tensor4 input;
  ResidualParams params;
};

Tensor4 residual_block(const Tensor4& x, ResidualParams& p, Mode mode, ResidualCache* cache = nullptr);
ResidualGrads residual_block_backward(const ResidualCache& cache, const ResidualParams& p,
                                      const Tensor4& grad_out);

}  // namespace evrecon::nn
