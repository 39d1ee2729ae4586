#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "savir/rng.hpp"

namespace savir::model {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ColVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// A named trainable tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix<T>::Zero(rows, cols)), grad(Matrix<T>::Zero(rows, cols)) {}
};

// tanh-approximated GELU
template <typename T>
T gelu(T x) {
  constexpr T k = T(0.7978845608028654);  // sqrt(2 / pi)
  const T u = k * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
T gelu_grad(T x) {
  constexpr T k = T(0.7978845608028654);
  const T u = k * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(u);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * k * (T(1) + T(3) * T(0.044715) * x * x);
}

template <typename T>
Matrix<T> gelu(const Matrix<T>& x) {
  constexpr T k = T(0.7978845608028654);
  const auto a = x.array();
  return (T(0.5) * a * (T(1) + (k * (a + T(0.044715) * a.cube())).tanh())).matrix();
}

/// dx = dy * gelu'(pre)
template <typename T>
Matrix<T> gelu_backward(const Matrix<T>& pre, const Matrix<T>& dy) {
  constexpr T k = T(0.7978845608028654);
  const auto a = pre.array();
  const auto t = (k * (a + T(0.044715) * a.cube())).tanh().eval();
  const auto grad = T(0.5) * (T(1) + t) + T(0.5) * a * (T(1) - t.square()) * k * (T(1) + T(3) * T(0.044715) * a.square());
  return (dy.array() * grad).matrix();
}

/// Row-wise softmax in place.
template <typename T>
void softmax_rows(Matrix<T>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

/// y = x W + b, with W stored (in x out).
template <typename T>
struct Linear {
  Param<T> weight;
  Param<T> bias;

  Linear() = default;
  Linear(const std::string& name, int in, int out) : weight(name + ".weight", in, out), bias(name + ".bias", 1, out) {}

  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
    weight.value = weight.value.unaryExpr([&](T) { return static_cast<T>((2.0 * rng.uniform01() - 1.0) * bound); });
    bias.value = bias.value.unaryExpr([&](T) { return static_cast<T>((2.0 * rng.uniform01() - 1.0) * bound); });
  }

  Matrix<T> forward(const Matrix<T>& x) const {
    Matrix<T> y(x.rows(), out_features());
    y.noalias() = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  /// Accumulates parameter gradients and returns dL/dx.
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& dy) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad += dy.colwise().sum();
    Matrix<T> dx(dy.rows(), in_features());
    dx.noalias() = dy * weight.value.transpose();
    return dx;
  }
};

template <typename T>
struct LayerNormCache {
  Matrix<T> normalized;
  ColVector<T> inv_std;
};

/// Normalizes each row over its features.
template <typename T>
struct LayerNorm {
  Param<T> gamma;
  Param<T> beta;
  T eps = T(1e-5);

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim) : gamma(name + ".gamma", 1, dim), beta(name + ".beta", 1, dim) {
    gamma.value.setOnes();
  }

  Matrix<T> forward(const Matrix<T>& x, LayerNormCache<T>& cache) const {
    const auto n = static_cast<T>(x.cols());
    cache.normalized.resize(x.rows(), x.cols());
    cache.inv_std.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const T mean = x.row(r).sum() / n;
      const auto centered = (x.row(r).array() - mean).matrix();
      const T var = centered.squaredNorm() / n;
      const T inv = T(1) / std::sqrt(var + eps);
      cache.inv_std(r) = inv;
      cache.normalized.row(r) = centered * inv;
    }
    Matrix<T> y = cache.normalized.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    return y;
  }

  Matrix<T> backward(const Matrix<T>& dy, const LayerNormCache<T>& cache) {
    gamma.grad += dy.cwiseProduct(cache.normalized).colwise().sum();
    beta.grad += dy.colwise().sum();
    const auto n = static_cast<T>(dy.cols());
    Matrix<T> dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    Matrix<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const T sum = dxhat.row(r).sum();
      const T dot = dxhat.row(r).dot(cache.normalized.row(r));
      dx.row(r) = (cache.inv_std(r) / n) * (n * dxhat.row(r).array() - sum - cache.normalized.row(r).array() * dot).matrix();
    }
    return dx;
  }
};

/// 3x3 convolution, stride 2, zero padding 1, over a batch of square images.
/// Activations are stored channel-major: row c holds every image's plane for
/// channel c, images back to back.
template <typename T>
struct Conv2d {
  Param<T> weight;  // out x (in * 9)
  Param<T> bias;    // out x 1
  int in_channels = 0;
  int out_channels = 0;

  Conv2d() = default;
  Conv2d(const std::string& name, int in, int out)
      : weight(name + ".weight", out, in * 9), bias(name + ".bias", out, 1), in_channels(in), out_channels(out) {}

  static int output_side(int side) { return (side - 1) / 2 + 1; }

  void init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (in_channels * 9.0));
    weight.value = weight.value.unaryExpr([&](T) { return static_cast<T>(rng.normal(0.0, stddev)); });
    bias.value.setZero();
  }

  static Matrix<T> im2col(const Matrix<T>& x, int channels, int images, int side) {
    const int out = output_side(side);
    const Eigen::Index plane = static_cast<Eigen::Index>(side) * side;
    const Eigen::Index out_plane = static_cast<Eigen::Index>(out) * out;
    Matrix<T> cols = Matrix<T>::Zero(static_cast<Eigen::Index>(channels) * 9, images * out_plane);
    for (int c = 0; c < channels; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          // output columns whose input column 2 * ox - 1 + kx is inside the image
          const int ox_lo = kx == 0 ? 1 : 0;
          const int ox_hi = std::min(out - 1, (side - kx) / 2);
          T* dst_row = cols.row(c * 9 + ky * 3 + kx).data();
          for (int n = 0; n < images; ++n) {
            const T* src = x.row(c).data() + n * plane;
            T* dst = dst_row + n * out_plane;
            for (int oy = 0; oy < out; ++oy) {
              const int iy = 2 * oy - 1 + ky;
              if (iy < 0 || iy >= side) continue;
              const T* line = src + iy * side + kx - 1;
              T* o = dst + oy * out;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) o[ox] = line[2 * ox];
            }
          }
        }
      }
    }
    return cols;
  }

  static Matrix<T> col2im(const Matrix<T>& cols, int channels, int images, int side) {
    const int out = output_side(side);
    const Eigen::Index plane = static_cast<Eigen::Index>(side) * side;
    const Eigen::Index out_plane = static_cast<Eigen::Index>(out) * out;
    Matrix<T> x = Matrix<T>::Zero(channels, images * plane);
    for (int c = 0; c < channels; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          // output columns whose input column 2 * ox - 1 + kx is inside the image
          const int ox_lo = kx == 0 ? 1 : 0;
          const int ox_hi = std::min(out - 1, (side - kx) / 2);
          const T* src_row = cols.row(c * 9 + ky * 3 + kx).data();
          for (int n = 0; n < images; ++n) {
            T* dst = x.row(c).data() + n * plane;
            const T* src = src_row + n * out_plane;
            for (int oy = 0; oy < out; ++oy) {
              const int iy = 2 * oy - 1 + ky;
              if (iy < 0 || iy >= side) continue;
              T* line = dst + iy * side + kx - 1;
              const T* o = src + oy * out;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) line[2 * ox] += o[ox];
            }
          }
        }
      }
    }
    return x;
  }

  /// Returns the pre-activation output (out_channels x images * out_side^2).
  Matrix<T> forward(const Matrix<T>& x, int images, int side, Matrix<T>& cols) const {
    cols = im2col(x, in_channels, images, side);
    Matrix<T> y(out_channels, cols.cols());
    y.noalias() = weight.value * cols;
    y.colwise() += bias.value.col(0);
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx unless `need_input_grad`
  /// is false, in which case an empty matrix comes back.
  Matrix<T> backward(const Matrix<T>& cols, const Matrix<T>& dy, int images, int side, bool need_input_grad) {
    weight.grad.noalias() += dy * cols.transpose();
    bias.grad += dy.rowwise().sum();
    if (!need_input_grad) return {};
    Matrix<T> dcols(cols.rows(), cols.cols());
    dcols.noalias() = weight.value.transpose() * dy;
    return col2im(dcols, in_channels, images, side);
  }
};

}  // namespace savir::model
