#include "evrecon/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "evrecon/errors.hpp"

namespace evrecon::nn {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension " + shape.str());
  }
  data_.assign(shape.numel(), fill);
}

void Tensor4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor4& Tensor4::operator+=(const Tensor4& rhs) {
  if (!(shape_ == rhs.shape_)) throw ShapeError("tensor add: " + shape_.str() + " vs " + rhs.shape_.str());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

void require_shape(const Tensor4& t, const Shape4& expected, const char* what) {
  if (!(t.shape() == expected)) {
    throw ShapeError(std::string(what) + ": expected " + expected.str() + ", got " +
                     t.shape().str());
  }
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw ShapeError("concat: " + a.shape().str() + " vs " + b.shape().str());
  }
  Tensor4 out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int n = 0; n < a.n(); ++n) {
    auto dst = out.sample(n);
    const auto sa = a.sample(n), sb = b.sample(n);
    std::copy(sa.begin(), sa.end(), dst.begin());
    std::copy(sb.begin(), sb.end(), dst.begin() + static_cast<std::ptrdiff_t>(sa.size()));
  }
  return out;
}

void split_channels(const Tensor4& t, int first, Tensor4& a, Tensor4& b) {
  a = Tensor4(t.n(), first, t.h(), t.w());
  b = Tensor4(t.n(), t.c() - first, t.h(), t.w());
  for (int n = 0; n < t.n(); ++n) {
    const auto src = t.sample(n);
    const auto split = static_cast<std::ptrdiff_t>(a.shape().sample());
    std::copy(src.begin(), src.begin() + split, a.sample(n).begin());
    std::copy(src.begin() + split, src.end(), b.sample(n).begin());
  }
}

Tensor4 relu(const Tensor4& x) {
  Tensor4 y(x.shape());
  const auto in = x.values();
  auto out = y.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return y;
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad) {
  require_shape(grad, x.shape(), "relu_backward");
  Tensor4 g(x.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = x.values()[i] > 0.0 ? grad.values()[i] : 0.0;
  return g;
}

Tensor4 sigmoid(const Tensor4& x) {
  Tensor4 y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] = 1.0 / (1.0 + std::exp(-x.values()[i]));
  return y;
}

Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad) {
  require_shape(grad, y.shape(), "sigmoid_backward");
  Tensor4 g(y.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = y.values()[i];
    g.values()[i] = grad.values()[i] * s * (1.0 - s);
  }
  return g;
}

namespace {

int reflect_index(int i, int size) {
  if (size == 1) return 0;
  const int period = 2 * (size - 1);
  i %= period;
  if (i < 0) i += period;
  return i < size ? i : period - i;
}

}  // namespace

Tensor4 reflect_pad(const Tensor4& x, int h, int w) {
  if (h < x.h() || w < x.w()) throw ShapeError("reflect_pad: target smaller than input");
  Tensor4 out(x.n(), x.c(), h, w);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int y = 0; y < h; ++y) {
        const int sy = reflect_index(y, x.h());
        for (int xx = 0; xx < w; ++xx) out(n, c, y, xx) = x(n, c, sy, reflect_index(xx, x.w()));
      }
    }
  }
  return out;
}

Tensor4 reflect_pad_backward(const Tensor4& grad, int h, int w) {
  Tensor4 out(grad.n(), grad.c(), h, w);
  for (int n = 0; n < grad.n(); ++n) {
    for (int c = 0; c < grad.c(); ++c) {
      for (int y = 0; y < grad.h(); ++y) {
        const int sy = reflect_index(y, h);
        for (int x = 0; x < grad.w(); ++x) out(n, c, sy, reflect_index(x, w)) += grad(n, c, y, x);
      }
    }
  }
  return out;
}

Tensor4 crop(const Tensor4& x, int h, int w) {
  if (h > x.h() || w > x.w()) throw ShapeError("crop: target larger than input");
  Tensor4 out(x.n(), x.c(), h, w);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) out(n, c, y, xx) = x(n, c, y, xx);
      }
    }
  }
  return out;
}

Tensor4 crop_backward(const Tensor4& grad, int full_h, int full_w) {
  Tensor4 out(grad.n(), grad.c(), full_h, full_w);
  for (int n = 0; n < grad.n(); ++n) {
    for (int c = 0; c < grad.c(); ++c) {
      for (int y = 0; y < grad.h(); ++y) {
        for (int x = 0; x < grad.w(); ++x) out(n, c, y, x) = grad(n, c, y, x);
      }
    }
  }
  return out;
}

}  // namespace evrecon::nn
