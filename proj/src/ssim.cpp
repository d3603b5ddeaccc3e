#include "evrecon/ssim.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "evrecon/errors.hpp"

namespace evrecon {

namespace {

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(size);
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    taps[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Valid separable correlation: (h x w) -> (h - n + 1) x (w - n + 1).
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h,
                                 const std::vector<double>& taps) {
  const int n = static_cast<int>(taps.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += taps[k] * img[y * w + x + k];
      tmp[y * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += taps[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

// Adjoint of filter_valid: scatters an (oh x ow) map back to (h x w).
std::vector<double> filter_valid_adjoint(const std::vector<double>& map, int w, int h,
                                         const std::vector<double>& taps) {
  const int n = static_cast<int>(taps.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = map[y * ow + x];
      for (int k = 0; k < n; ++k) tmp[(y + k) * ow + x] += taps[k] * v;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = tmp[y * ow + x];
      for (int k = 0; k < n; ++k) out[y * w + x + k] += taps[k] * v;
    }
  }
  return out;
}

}  // namespace

double ssim_index(std::span<const double> a, std::span<const double> b, int width, int height,
                  std::span<double> grad_a, const SsimParams& params) {
  const auto n = static_cast<std::size_t>(width) * height;
  if (a.size() != n || b.size() != n) throw ShapeError("ssim: image sizes do not match");
  if (width < params.window || height < params.window) {
    throw ShapeError("ssim: image smaller than the " + std::to_string(params.window) +
                     "-pixel window");
  }
  if (!grad_a.empty() && grad_a.size() != n) throw ShapeError("ssim: gradient buffer size");

  const auto taps = gaussian_taps(params.window, params.sigma);
  std::vector<double> xa(a.begin(), a.end()), yb(b.begin(), b.end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = xa[i] * xa[i];
    yy[i] = yb[i] * yb[i];
    xy[i] = xa[i] * yb[i];
  }
  const auto mu_x = filter_valid(xa, width, height, taps);
  const auto mu_y = filter_valid(yb, width, height, taps);
  const auto e_xx = filter_valid(xx, width, height, taps);
  const auto e_yy = filter_valid(yy, width, height, taps);
  const auto e_xy = filter_valid(xy, width, height, taps);

  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);
  const std::size_t m = mu_x.size();
  const bool want_grad = !grad_a.empty();
  std::vector<double> d_mu(want_grad ? m : 0), d_exx(want_grad ? m : 0), d_exy(want_grad ? m : 0);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double sxx = e_xx[i] - mx * mx;
    const double syy = e_yy[i] - my * my;
    const double sxy = e_xy[i] - mx * my;
    const double a1 = 2.0 * mx * my + c1;
    const double a2 = 2.0 * sxy + c2;
    const double b1 = mx * mx + my * my + c1;
    const double b2 = sxx + syy + c2;
    const double s = a1 * a2 / (b1 * b2);
    total += s;
    if (want_grad) {
      const double denom = b1 * b2;
      // dA1/dmx = 2my, dA2/dmx = -2my, dB1/dmx = 2mx, dB2/dmx = -2mx
      d_mu[i] = (2.0 * my * a2 - 2.0 * my * a1) / denom - s * (2.0 * mx / b1 - 2.0 * mx / b2);
      d_exx[i] = -s / b2;
      d_exy[i] = 2.0 * a1 / denom;
    }
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  if (want_grad) {
    for (std::size_t i = 0; i < m; ++i) {
      d_mu[i] *= inv_m;
      d_exx[i] *= inv_m;
      d_exy[i] *= inv_m;
    }
    const auto g_mu = filter_valid_adjoint(d_mu, width, height, taps);
    const auto g_xx = filter_valid_adjoint(d_exx, width, height, taps);
    const auto g_xy = filter_valid_adjoint(d_exy, width, height, taps);
    for (std::size_t i = 0; i < n; ++i) {
      grad_a[i] = g_mu[i] + 2.0 * xa[i] * g_xx[i] + yb[i] * g_xy[i];
    }
  }
  return total / static_cast<double>(m);
}

}  // namespace evrecon
