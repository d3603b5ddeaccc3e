#pragma once

#include <span>

#include "evrecon/nn/tensor.hpp"

namespace evrecon::nn {

/// Weight of the structural term in the reconstruction distance.
inline constexpr double kSsimWeight = 0.5;

/// d(x, y) = mean|x - y| + 0.5 (1 - SSIM(x, y)) for one image; writes dd/dx into
/// `grad` when non-empty. Stand-in for a learned perceptual distance.
double image_distance(std::span<const double> x, std::span<const double> y, int width, int height,
                      std::span<double> grad = {});

struct LossResult {
  double value = 0.0;
  Tensor4 grad;  // d value / d prediction
};

/// Mean of image_distance over the batch; prediction and target are (N, 1, H, W).
LossResult loss_recon(const Tensor4& prediction, const Tensor4& target);

}  // namespace evrecon::nn
