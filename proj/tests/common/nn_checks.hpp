#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

// Finite-difference and adjoint checks for the network layers. Each returns the
// worst relative error |analytic - numeric| / max(|analytic|, |numeric|, floor)
// over every checked coordinate.
namespace evrecon::checks {

inline constexpr double kFdStep = 1e-4;
inline constexpr double kRelFloor = 1e-6;

double relative_error(double analytic, double numeric);

/// Central differences of `f` w.r.t. every entry of `params` (every `stride`-th).
double fd_check(std::span<double> params, std::span<const double> analytic,
                const std::function<double()>& f, std::size_t stride = 1, double step = kFdStep);

double check_conv(std::uint64_t seed);
double check_transposed_conv(std::uint64_t seed);
double check_batch_norm(std::uint64_t seed);
double check_residual_block(std::uint64_t seed);
double check_loss(std::uint64_t seed);
struct UNetCheck {
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t kinked = 0;  // coordinates skipped because a probe flipped a ReLU
};

/// Tiny UNet (8 base channels) on 32x32 input, every parameter and the input.
UNetCheck check_unet(std::uint64_t seed);
/// Unrolled recurrent loss (BPTT through recycled frames), tiny UNet. Uses a
/// 1e-5 step: three chained passes cross ReLU kinks too often at 1e-4.
double check_bptt(std::uint64_t seed, std::size_t stride);

/// |<conv(x), y> - <x, conv^T(y)>| for one random parameterization.
double adjoint_gap(std::uint64_t seed);

}  // namespace evrecon::checks
