#pragma once

#include <span>

namespace evrecon {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean local SSIM over every position where the Gaussian window fits inside
/// the image ("valid" windows). Images are row-major width x height; both
/// dimensions must be >= params.window. If `grad_a` is non-empty it receives
/// d(mean SSIM)/d(a).
double ssim_index(std::span<const double> a, std::span<const double> b, int width, int height,
                  std::span<double> grad_a = {}, const SsimParams& params = {});

}  // namespace evrecon
