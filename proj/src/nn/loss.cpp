#include "evrecon/nn/loss.hpp"

#include <cmath>
#include <vector>

#include "evrecon/errors.hpp"
#include "evrecon/ssim.hpp"

namespace evrecon::nn {

double image_distance(std::span<const double> x, std::span<const double> y, int width, int height,
                      std::span<double> grad) {
  if (x.size() != y.size()) throw ShapeError("image_distance: size mismatch");
  const auto n = static_cast<double>(x.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) l1 += std::abs(x[i] - y[i]);
  l1 /= n;
  std::vector<double> g_ssim(grad.empty() ? 0 : x.size());
  const double s = ssim_index(x, y, width, height, g_ssim);
  if (!grad.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double diff = x[i] - y[i];
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      grad[i] = sign / n - kSsimWeight * g_ssim[i];
    }
  }
  return l1 + kSsimWeight * (1.0 - s);
}

LossResult loss_recon(const Tensor4& prediction, const Tensor4& target) {
  require_shape(target, prediction.shape(), "loss_recon target");
  if (prediction.c() != 1) throw ShapeError("loss_recon expects single-channel images");
  LossResult r{0.0, Tensor4(prediction.shape())};
  const double inv_n = 1.0 / prediction.n();
  for (int n = 0; n < prediction.n(); ++n) {
    auto g = r.grad.sample(n);
    r.value += image_distance(prediction.sample(n), target.sample(n), prediction.w(),
                              prediction.h(), g);
    for (double& v : g) v *= inv_n;
  }
  r.value *= inv_n;
  return r;
}

}  // namespace evrecon::nn
