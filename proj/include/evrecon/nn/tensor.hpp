#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace evrecon::nn {

struct Shape4 {
  int n = 0, c = 0, h = 0, w = 0;

  std::size_t numel() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }
  std::string str() const;
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Dense NCHW array of doubles.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  Tensor4(int n, int c, int h, int w, double fill = 0.0) : Tensor4(Shape4{n, c, h, w}, fill) {}

  const Shape4& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  double operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::span<double> sample(int n) { return {data_.data() + n * shape_.sample(), shape_.sample()}; }
  std::span<const double> sample(int n) const {
    return {data_.data() + n * shape_.sample(), shape_.sample()};
  }
  std::span<double> channel(int n, int c) {
    return {data_.data() + n * shape_.sample() + c * shape_.plane(), shape_.plane()};
  }
  std::span<const double> channel(int n, int c) const {
    return {data_.data() + n * shape_.sample() + c * shape_.plane(), shape_.plane()};
  }

  void fill(double v);
  Tensor4& operator+=(const Tensor4& rhs);
  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape4 shape_{};
  std::vector<double> data_;
};

void require_shape(const Tensor4& t, const Shape4& expected, const char* what);

/// Channel-wise concatenation of two tensors with equal n, h, w.
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
/// Inverse of concat_channels for gradients: splits at channel `first`.
void split_channels(const Tensor4& t, int first, Tensor4& a, Tensor4& b);

Tensor4 relu(const Tensor4& x);
/// grad * (x > 0); x is the pre-activation input.
Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad);
Tensor4 sigmoid(const Tensor4& x);
/// grad * y (1 - y); y is the sigmoid output.
Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad);

/// Reflect-pads bottom and right to (h, w); reflection folds repeatedly when the
/// pad exceeds the source size.
Tensor4 reflect_pad(const Tensor4& x, int h, int w);
Tensor4 reflect_pad_backward(const Tensor4& grad, int h, int w);
/// Top-left (h, w) crop.
Tensor4 crop(const Tensor4& x, int h, int w);
Tensor4 crop_backward(const Tensor4& grad, int full_h, int full_w);

}  // namespace evrecon::nn
