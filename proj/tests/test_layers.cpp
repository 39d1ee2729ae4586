#include <doctest.h>

#include <cmath>

#include "savir/model/layers.hpp"

using namespace savir::model;
using savir::Rng;

namespace {

Matrix<double> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, 1.0);
  return m;
}

// Direct 3x3 stride-2 pad-1 convolution, one output pixel at a time.
double direct_conv(const Conv2d<double>& conv, const Matrix<double>& x, int image, int side, int oc, int oy, int ox) {
  double acc = conv.bias.value(oc, 0);
  for (int ic = 0; ic < conv.in_channels; ++ic) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int iy = 2 * oy - 1 + ky;
        const int ix = 2 * ox - 1 + kx;
        if (iy < 0 || ix < 0 || iy >= side || ix >= side) continue;
        acc += conv.weight.value(oc, ic * 9 + ky * 3 + kx) * x(ic, image * side * side + iy * side + ix);
      }
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("conv forward matches direct convolution") {
  Rng rng(3);
  Conv2d<double> conv("c", 2, 3);
  conv.init(rng);
  conv.bias.value = random_matrix(3, 1, rng);
  for (int side : {7, 8}) {
    const int images = 2;
    const Matrix<double> x = random_matrix(2, images * side * side, rng);
    Matrix<double> cols;
    const Matrix<double> y = conv.forward(x, images, side, cols);
    const int out = Conv2d<double>::output_side(side);
    REQUIRE(y.rows() == 3);
    REQUIRE(y.cols() == images * out * out);
    for (int n = 0; n < images; ++n)
      for (int oc = 0; oc < 3; ++oc)
        for (int oy = 0; oy < out; ++oy)
          for (int ox = 0; ox < out; ++ox)
            CHECK(y(oc, n * out * out + oy * out + ox) == doctest::Approx(direct_conv(conv, x, n, side, oc, oy, ox)).epsilon(1e-12));
  }
}

TEST_CASE("col2im is the adjoint of im2col") {
  Rng rng(5);
  const int side = 9, images = 3, channels = 2;
  const Matrix<double> x = random_matrix(channels, images * side * side, rng);
  const Matrix<double> cols = Conv2d<double>::im2col(x, channels, images, side);
  const Matrix<double> c = random_matrix(cols.rows(), cols.cols(), rng);
  const double lhs = cols.cwiseProduct(c).sum();
  const double rhs = x.cwiseProduct(Conv2d<double>::col2im(c, channels, images, side)).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("output side halves with ceiling") {
  CHECK(Conv2d<float>::output_side(96) == 48);
  CHECK(Conv2d<float>::output_side(3) == 2);
  CHECK(Conv2d<float>::output_side(1) == 1);
  int side = 224;
  for (int s = 0; s < 5; ++s) side = Conv2d<float>::output_side(side);
  CHECK(side == 7);
}

TEST_CASE("gelu derivative matches finite differences") {
  for (double x : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
    const double h = 1e-6;
    const double numeric = (gelu(x + h) - gelu(x - h)) / (2 * h);
    CHECK(gelu_grad(x) == doctest::Approx(numeric).epsilon(1e-8));
  }
  CHECK(gelu(0.0) == 0.0);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(1);
  Matrix<double> m = random_matrix(5, 7, rng) * 10.0;
  softmax_rows(m);
  for (Eigen::Index r = 0; r < m.rows(); ++r) CHECK(std::abs(m.row(r).sum() - 1.0) < 1e-12);
  CHECK(m.minCoeff() >= 0.0);
}

TEST_CASE("layer norm standardizes rows") {
  Rng rng(2);
  LayerNorm<double> ln("ln", 6);
  LayerNormCache<double> cache;
  const Matrix<double> y = ln.forward(random_matrix(4, 6, rng) * 3.0 + Matrix<double>::Constant(4, 6, 5.0), cache);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    CHECK(std::abs(y.row(r).mean()) < 1e-12);
    CHECK(y.row(r).squaredNorm() / 6.0 == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("linear and layer norm input gradients match finite differences") {
  Rng rng(4);
  Linear<double> lin("l", 5, 3);
  lin.init(rng);
  LayerNorm<double> ln("ln", 3);
  ln.gamma.value = random_matrix(1, 3, rng);
  ln.beta.value = random_matrix(1, 3, rng);
  Matrix<double> x = random_matrix(2, 5, rng);
  const Matrix<double> w = random_matrix(2, 3, rng);
  auto f = [&](const Matrix<double>& in) {
    LayerNormCache<double> c;
    return ln.forward(lin.forward(in), c).cwiseProduct(w).sum();
  };
  LayerNormCache<double> cache;
  const Matrix<double> h = lin.forward(x);
  ln.forward(h, cache);
  const Matrix<double> dx = lin.backward(x, ln.backward(w, cache));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix<double> up = x, down = x;
    up.data()[i] += 1e-6;
    down.data()[i] -= 1e-6;
    CHECK(dx.data()[i] == doctest::Approx((f(up) - f(down)) / 2e-6).epsilon(1e-6));
  }
}
