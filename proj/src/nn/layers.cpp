#include "evrecon/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>

#include "evrecon/errors.hpp"

namespace evrecon::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Patch matrix of a batch: rows (c, ki, kj), columns (n, oy, ox).
RowMatrix im2col(const Tensor4& x, int k, int stride, int pad, int out_h, int out_w) {
  const int n_batch = x.n(), channels = x.c(), h = x.h(), w = x.w();
  const std::size_t cols = static_cast<std::size_t>(n_batch) * out_h * out_w;
  RowMatrix col(static_cast<Eigen::Index>(channels) * k * k, static_cast<Eigen::Index>(cols));
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* row = col.data() + ((static_cast<std::size_t>(c) * k + ki) * k + kj) * cols;
        for (int n = 0; n < n_batch; ++n) {
          const double* src = x.channel(n, c).data();
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad + ki;
            double* dst = row + (static_cast<std::size_t>(n) * out_h + oy) * out_w;
            if (iy < 0 || iy >= h) {
              std::fill(dst, dst + out_w, 0.0);
              continue;
            }
            const double* src_row = src + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride - pad + kj;
              dst[ox] = (ix >= 0 && ix < w) ? src_row[ix] : 0.0;
            }
          }
        }
      }
    }
  }
  return col;
}

// Adjoint of im2col: accumulates patch columns back into an (n, channels, h, w) tensor.
Tensor4 col2im(const RowMatrix& col, int n_batch, int channels, int h, int w, int k, int stride,
               int pad, int out_h, int out_w) {
  Tensor4 x(n_batch, channels, h, w);
  const std::size_t cols = static_cast<std::size_t>(n_batch) * out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* row = col.data() + ((static_cast<std::size_t>(c) * k + ki) * k + kj) * cols;
        for (int n = 0; n < n_batch; ++n) {
          double* dst = x.channel(n, c).data();
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= h) continue;
            const double* src = row + (static_cast<std::size_t>(n) * out_h + oy) * out_w;
            double* dst_row = dst + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride - pad + kj;
              if (ix >= 0 && ix < w) dst_row[ix] += src[ox];
            }
          }
        }
      }
    }
  }
  return x;
}

// (C, N*H*W) view of an NCHW tensor.
RowMatrix channel_matrix(const Tensor4& t) {
  const std::size_t plane = t.shape().plane();
  RowMatrix m(t.c(), static_cast<Eigen::Index>(plane * t.n()));
  for (int c = 0; c < t.c(); ++c) {
    for (int n = 0; n < t.n(); ++n) {
      const auto src = t.channel(n, c);
      std::copy(src.begin(), src.end(), m.data() + (static_cast<std::size_t>(c) * t.n() + n) * plane);
    }
  }
  return m;
}

Tensor4 from_channel_matrix(const RowMatrix& m, int n_batch, int h, int w) {
  Tensor4 t(n_batch, static_cast<int>(m.rows()), h, w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < t.c(); ++c) {
    for (int n = 0; n < n_batch; ++n) {
      const double* src = m.data() + (static_cast<std::size_t>(c) * n_batch + n) * plane;
      std::copy(src, src + plane, t.channel(n, c).begin());
    }
  }
  return t;
}

void check_conv(const Tensor4& x, const ConvParams& p, int in_channels, int stride, const char* op) {
  if (p.kernel.h() != p.kernel.w()) throw ShapeError(std::string(op) + ": kernel must be square");
  if (x.c() != in_channels) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x.c()) +
                     " channels, kernel expects " + std::to_string(in_channels));
  }
  if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
}

void add_bias(Tensor4& y, const std::vector<double>& bias) {
  if (bias.empty()) return;
  if (static_cast<int>(bias.size()) != y.c()) throw ShapeError("bias size mismatch");
  for (int n = 0; n < y.n(); ++n) {
    for (int c = 0; c < y.c(); ++c) {
      for (double& v : y.channel(n, c)) v += bias[c];
    }
  }
}

std::vector<double> bias_grad(const Tensor4& grad_out) {
  std::vector<double> g(grad_out.c(), 0.0);
  for (int n = 0; n < grad_out.n(); ++n) {
    for (int c = 0; c < grad_out.c(); ++c) {
      for (double v : grad_out.channel(n, c)) g[c] += v;
    }
  }
  return g;
}

}  // namespace

// ---- conv2d ----------------------------------------------------------------

Tensor4 conv2d(const Tensor4& x, const ConvParams& p, int stride, int padding) {
  check_conv(x, p, p.kernel.c(), stride, "conv2d");
  const int k = p.kernel_size();
  const int oh = conv_output_size(x.h(), k, stride, padding);
  const int ow = conv_output_size(x.w(), k, stride, padding);
  if (oh < 1 || ow < 1) throw ShapeError("conv2d: input " + x.shape().str() + " too small");
  const RowMatrix col = im2col(x, k, stride, padding, oh, ow);
  const ConstMatMap kmat(p.kernel.data(), p.kernel.n(), static_cast<Eigen::Index>(p.kernel.shape().sample()));
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  const RowMatrix out = kmat * col;  // (out, N*P) with columns (n, oy, ox)
  Tensor4 y(x.n(), p.kernel.n(), oh, ow);
  for (int c = 0; c < y.c(); ++c) {
    for (int n = 0; n < y.n(); ++n) {
      const double* src = out.data() + c * out.cols() + n * plane;
      std::copy(src, src + plane, y.channel(n, c).begin());
    }
  }
  add_bias(y, p.bias);
  return y;
}

ConvGrads conv2d_backward(const Tensor4& x, const ConvParams& p, int stride, int padding,
                          const Tensor4& grad_out) {
  check_conv(x, p, p.kernel.c(), stride, "conv2d_backward");
  const int k = p.kernel_size();
  const int oh = conv_output_size(x.h(), k, stride, padding);
  const int ow = conv_output_size(x.w(), k, stride, padding);
  require_shape(grad_out, Shape4{x.n(), p.kernel.n(), oh, ow}, "conv2d_backward grad");
  const RowMatrix col = im2col(x, k, stride, padding, oh, ow);
  const RowMatrix gmat = channel_matrix(grad_out);  // (out, N*P)
  const ConstMatMap kmat(p.kernel.data(), p.kernel.n(), static_cast<Eigen::Index>(p.kernel.shape().sample()));

  ConvGrads g;
  g.kernel = Tensor4(p.kernel.shape());
  MatMap(g.kernel.data(), kmat.rows(), kmat.cols()).noalias() = gmat * col.transpose();
  g.bias = bias_grad(grad_out);
  const RowMatrix gcol = kmat.transpose() * gmat;
  g.input = col2im(gcol, x.n(), x.c(), x.h(), x.w(), k, stride, padding, oh, ow);
  return g;
}

// ---- transposed conv -------------------------------------------------------

Tensor4 transposed_conv2d(const Tensor4& x, const ConvParams& p, int stride, int padding,
                          int output_padding) {
  check_conv(x, p, p.kernel.n(), stride, "transposed_conv2d");
  if (output_padding < 0 || output_padding >= stride) {
    throw ShapeError("transposed_conv2d: output_padding must be in [0, stride)");
  }
  const int k = p.kernel_size();
  const int oh = transposed_output_size(x.h(), k, stride, padding, output_padding);
  const int ow = transposed_output_size(x.w(), k, stride, padding, output_padding);
  if (oh < 1 || ow < 1) throw ShapeError("transposed_conv2d: invalid output size");
  const int out_c = p.kernel.c();
  const ConstMatMap wmat(p.kernel.data(), p.kernel.n(), static_cast<Eigen::Index>(p.kernel.shape().sample()));
  const RowMatrix xmat = channel_matrix(x);           // (in, N*Pin)
  const RowMatrix col = wmat.transpose() * xmat;      // (out*k*k, N*Pin)
  Tensor4 y = col2im(col, x.n(), out_c, oh, ow, k, stride, padding, x.h(), x.w());
  add_bias(y, p.bias);
  return y;
}

ConvGrads transposed_conv2d_backward(const Tensor4& x, const ConvParams& p, int stride,
                                     int padding, const Tensor4& grad_out) {
  check_conv(x, p, p.kernel.n(), stride, "transposed_conv2d_backward");
  const int k = p.kernel_size();
  if (grad_out.n() != x.n() || grad_out.c() != p.kernel.c()) {
    throw ShapeError("transposed_conv2d_backward: grad shape " + grad_out.shape().str());
  }
  const RowMatrix gcol = im2col(grad_out, k, stride, padding, x.h(), x.w());  // (out*k*k, N*Pin)
  const ConstMatMap wmat(p.kernel.data(), p.kernel.n(), static_cast<Eigen::Index>(p.kernel.shape().sample()));
  const RowMatrix xmat = channel_matrix(x);

  ConvGrads g;
  g.kernel = Tensor4(p.kernel.shape());
  MatMap(g.kernel.data(), wmat.rows(), wmat.cols()).noalias() = xmat * gcol.transpose();
  g.bias = bias_grad(grad_out);
  const RowMatrix gx = wmat * gcol;  // (in, N*Pin)
  g.input = from_channel_matrix(gx, x.n(), x.h(), x.w());
  return g;
}

// ---- batch norm ------------------------------------------------------------

BatchNormParams BatchNormParams::identity(int channels) {
  return BatchNormParams{std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0),
                         std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

Tensor4 batch_norm(const Tensor4& x, BatchNormParams& p, Mode mode, BatchNormCache* cache) {
  if (p.channels() != x.c()) throw ShapeError("batch_norm: channel mismatch");
  const int channels = x.c();
  const double count = static_cast<double>(x.n()) * x.shape().plane();
  Tensor4 y(x.shape());
  Tensor4 xhat(x.shape());
  std::vector<double> inv_std(channels);
  for (int c = 0; c < channels; ++c) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::train) {
      for (int n = 0; n < x.n(); ++n) {
        for (double v : x.channel(n, c)) mean += v;
      }
      mean /= count;
      for (int n = 0; n < x.n(); ++n) {
        for (double v : x.channel(n, c)) var += (v - mean) * (v - mean);
      }
      var /= count;
      const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
      p.running_mean[c] = (1.0 - kBatchNormMomentum) * p.running_mean[c] + kBatchNormMomentum * mean;
      p.running_var[c] = (1.0 - kBatchNormMomentum) * p.running_var[c] + kBatchNormMomentum * unbiased;
    } else {
      mean = p.running_mean[c];
      var = p.running_var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEps);
    for (int n = 0; n < x.n(); ++n) {
      const auto src = x.channel(n, c);
      auto xh = xhat.channel(n, c);
      auto dst = y.channel(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        xh[i] = (src[i] - mean) * inv_std[c];
        dst[i] = p.scale[c] * xh[i] + p.shift[c];
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

BatchNormGrads batch_norm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                   const Tensor4& grad_out) {
  const Tensor4& xhat = cache.xhat;
  require_shape(grad_out, xhat.shape(), "batch_norm_backward");
  const int channels = xhat.c();
  const double count = static_cast<double>(xhat.n()) * xhat.shape().plane();
  BatchNormGrads g{Tensor4(xhat.shape()), std::vector<double>(channels, 0.0),
                   std::vector<double>(channels, 0.0)};
  for (int c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < xhat.n(); ++n) {
      const auto dy = grad_out.channel(n, c);
      const auto xh = xhat.channel(n, c);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xh[i];
      }
    }
    g.shift[c] = sum_dy;
    g.scale[c] = sum_dy_xhat;
    const double k = p.scale[c] * cache.inv_std[c];
    for (int n = 0; n < xhat.n(); ++n) {
      const auto dy = grad_out.channel(n, c);
      const auto xh = xhat.channel(n, c);
      auto dx = g.input.channel(n, c);
      if (cache.mode == Mode::train) {
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dx[i] = k * (dy[i] - sum_dy / count - xh[i] * sum_dy_xhat / count);
        }
      } else {
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = k * dy[i];
      }
    }
  }
  return g;
}

// ---- residual block --------------------------------------------------------

Tensor4 residual_block(const Tensor4& x, ResidualParams& p, Mode mode, ResidualCache* cache) {
  if (p.conv1.kernel.c() != x.c() || p.conv2.kernel.n() != x.c()) {
    throw ShapeError("residual_block: channel mismatch, input " + x.shape().str());
  }
  const int pad1 = p.conv1.kernel_size() / 2;
  const int pad2 = p.conv2.kernel_size() / 2;
  BatchNormCache bn1, bn2;
  Tensor4 pre1 = batch_norm(conv2d(x, p.conv1, 1, pad1), p.bn1, mode, &bn1);
  Tensor4 act1 = relu(pre1);
  Tensor4 sum = batch_norm(conv2d(act1, p.conv2, 1, pad2), p.bn2, mode, &bn2);
  require_shape(sum, x.shape(), "residual_block output");
  sum += x;
  Tensor4 out = relu(sum);
  if (cache) {
    cache->input = x;
    cache->pre_act1 = std::move(pre1);
    cache->act1 = std::move(act1);
    cache->pre_out = std::move(sum);
    cache->bn1 = std::move(bn1);
    cache->bn2 = std::move(bn2);
  }
  return out;
}

ResidualGrads residual_block_backward(const ResidualCache& cache, const ResidualParams& p,
                                      const Tensor4& grad_out) {
  const int pad1 = p.conv1.kernel_size() / 2;
  const int pad2 = p.conv2.kernel_size() / 2;
  const Tensor4 g_sum = relu_backward(cache.pre_out, grad_out);
  const BatchNormGrads g_bn2 = batch_norm_backward(cache.bn2, p.bn2, g_sum);
  const ConvGrads g_c2 = conv2d_backward(cache.act1, p.conv2, 1, pad2, g_bn2.input);
  const Tensor4 g_pre1 = relu_backward(cache.pre_act1, g_c2.input);
  const BatchNormGrads g_bn1 = batch_norm_backward(cache.bn1, p.bn1, g_pre1);
  const ConvGrads g_c1 = conv2d_backward(cache.input, p.conv1, 1, pad1, g_bn1.input);

  ResidualGrads g;
  g.input = g_c1.input;
  g.input += g_sum;
  g.params.conv1 = ConvParams{g_c1.kernel, g_c1.bias};
  g.params.conv2 = ConvParams{g_c2.kernel, g_c2.bias};
  g.params.bn1 = BatchNormParams{g_bn1.scale, g_bn1.shift, {}, {}};
  g.params.bn2 = BatchNormParams{g_bn2.scale, g_bn2.shift, {}, {}};
  return g;
}

}  // namespace evrecon::nn
