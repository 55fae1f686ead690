#include <cstring>
#include <vector>

#include "doctest.h"
#include "trajtensor/kernels.hpp"
#include "trajtensor/rng.hpp"

using namespace trajtensor;
using namespace trajtensor::kernels;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("conv3d parallel path matches the serial reference bitwise") {
  Rng rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    ConvDims d;
    d.in_ch = 1 + rng.below(4);
    d.out_ch = 1 + rng.below(5);
    d.k_d = d.k_h = d.k_w = 3;
    d.p_d = d.p_h = d.p_w = 1;
    d.in_d = 1 + rng.below(5);
    d.in_h = 2 + rng.below(5);
    d.in_w = 2 + rng.below(8);
    auto in = random_vec(d.in_size(), rng);
    auto w = random_vec(d.weight_size(), rng);
    auto b = random_vec(d.out_ch, rng);

    std::vector<double> out_ref(d.out_size()), out_omp(d.out_size());
    reference::conv3d_forward(in.data(), w.data(), b.data(), out_ref.data(), d);
    conv3d_forward(in.data(), w.data(), b.data(), out_omp.data(), d);
    CHECK(bitwise_equal(out_ref, out_omp));

    auto dout = random_vec(d.out_size(), rng);
    std::vector<double> din_ref(d.in_size()), din_omp(d.in_size());
    reference::conv3d_backward_input(w.data(), dout.data(), din_ref.data(), d);
    conv3d_backward_input(w.data(), dout.data(), din_omp.data(), d);
    CHECK(bitwise_equal(din_ref, din_omp));

    std::vector<double> dw_ref(d.weight_size()), dw_omp(d.weight_size());
    std::vector<double> db_ref(d.out_ch), db_omp(d.out_ch);
    reference::conv3d_backward_params(in.data(), dout.data(), dw_ref.data(), db_ref.data(), d);
    conv3d_backward_params(in.data(), dout.data(), dw_omp.data(), db_omp.data(), d);
    CHECK(bitwise_equal(dw_ref, dw_omp));
    CHECK(bitwise_equal(db_ref, db_omp));
  }
}

TEST_CASE("tconv3d parallel path matches the serial reference bitwise") {
  Rng rng(103);
  for (int trial = 0; trial < 8; ++trial) {
    TConvDims d;
    d.in_ch = 1 + rng.below(4);
    d.out_ch = 1 + rng.below(4);
    d.k_d = d.k_h = d.k_w = 4;
    d.s_d = d.s_h = d.s_w = 2;
    d.p_d = d.p_h = d.p_w = 1;
    d.in_d = 1 + rng.below(4);
    d.in_h = 2 + rng.below(4);
    d.in_w = 2 + rng.below(4);
    auto in = random_vec(d.in_size(), rng);
    auto w = random_vec(d.weight_size(), rng);
    auto b = random_vec(d.out_ch, rng);

    std::vector<double> out_ref(d.out_size()), out_omp(d.out_size());
    reference::tconv3d_forward(in.data(), w.data(), b.data(), out_ref.data(), d);
    tconv3d_forward(in.data(), w.data(), b.data(), out_omp.data(), d);
    CHECK(bitwise_equal(out_ref, out_omp));

    auto dout = random_vec(d.out_size(), rng);
    std::vector<double> din_ref(d.in_size()), din_omp(d.in_size());
    reference::tconv3d_backward_input(w.data(), dout.data(), din_ref.data(), d);
    tconv3d_backward_input(w.data(), dout.data(), din_omp.data(), d);
    CHECK(bitwise_equal(din_ref, din_omp));

    std::vector<double> dw_ref(d.weight_size()), dw_omp(d.weight_size());
    std::vector<double> db_ref(d.out_ch), db_omp(d.out_ch);
    reference::tconv3d_backward_params(in.data(), dout.data(), dw_ref.data(), db_ref.data(), d);
    tconv3d_backward_params(in.data(), dout.data(), dw_omp.data(), db_omp.data(), d);
    CHECK(bitwise_equal(dw_ref, dw_omp));
    CHECK(bitwise_equal(db_ref, db_omp));
  }
}

TEST_CASE("maxpool and dense parallel paths match the reference bitwise") {
  Rng rng(105);
  PoolDims d;
  d.ch = 3;
  d.in_d = 4;
  d.in_h = 6;
  d.in_w = 8;
  d.k_d = 2;
  d.k_h = 2;
  d.k_w = 2;
  auto in = random_vec(d.in_size(), rng);
  std::vector<double> out_ref(d.out_size()), out_omp(d.out_size());
  std::vector<size_t> am_ref(d.out_size()), am_omp(d.out_size());
  reference::maxpool3d_forward(in.data(), out_ref.data(), am_ref.data(), d);
  maxpool3d_forward(in.data(), out_omp.data(), am_omp.data(), d);
  CHECK(bitwise_equal(out_ref, out_omp));
  CHECK(am_ref == am_omp);

  auto dout = random_vec(d.out_size(), rng);
  std::vector<double> din_ref(d.in_size()), din_omp(d.in_size());
  reference::maxpool3d_backward(am_ref.data(), dout.data(), din_ref.data(), d);
  maxpool3d_backward(am_omp.data(), dout.data(), din_omp.data(), d);
  CHECK(bitwise_equal(din_ref, din_omp));

  size_t out_n = 17, in_n = 29;
  auto w = random_vec(out_n * in_n, rng);
  auto b = random_vec(out_n, rng);
  auto x = random_vec(in_n, rng);
  std::vector<double> y_ref(out_n), y_omp(out_n);
  reference::dense_forward(w.data(), b.data(), x.data(), y_ref.data(), out_n, in_n);
  dense_forward(w.data(), b.data(), x.data(), y_omp.data(), out_n, in_n);
  CHECK(bitwise_equal(y_ref, y_omp));

  auto dy = random_vec(out_n, rng);
  std::vector<double> dx_ref(in_n), dx_omp(in_n);
  reference::dense_backward_input(w.data(), dy.data(), dx_ref.data(), out_n, in_n);
  dense_backward_input(w.data(), dy.data(), dx_omp.data(), out_n, in_n);
  CHECK(bitwise_equal(dx_ref, dx_omp));
}

TEST_CASE("tconv forward is the adjoint of conv at stride 1") {
  // <conv(x), y> == <x, tconv(y)> for the same raw weight block.
  Rng rng(107);
  for (int trial = 0; trial < 6; ++trial) {
    ConvDims c;
    c.in_ch = 1 + rng.below(3);
    c.out_ch = 1 + rng.below(3);
    c.k_d = c.k_h = c.k_w = 3;
    c.p_d = c.p_h = c.p_w = 1;
    c.in_d = 2 + rng.below(3);
    c.in_h = 2 + rng.below(3);
    c.in_w = 2 + rng.below(4);

    TConvDims t;
    t.in_ch = c.out_ch;  // channel roles swap
    t.out_ch = c.in_ch;
    t.k_d = t.k_h = t.k_w = 3;
    t.s_d = t.s_h = t.s_w = 1;
    t.p_d = t.p_h = t.p_w = 1;
    t.in_d = c.out_d();
    t.in_h = c.out_h();
    t.in_w = c.out_w();

    auto x = random_vec(c.in_size(), rng);
    auto w = random_vec(c.weight_size(), rng);
    auto y = random_vec(c.out_size(), rng);

    std::vector<double> cx(c.out_size());
    conv3d_forward(x.data(), w.data(), nullptr, cx.data(), c);
    std::vector<double> ty(t.out_size());
    REQUIRE(t.out_size() == c.in_size());
    tconv3d_forward(y.data(), w.data(), nullptr, ty.data(), t);

    double lhs = dot(cx, y);
    double rhs = dot(x, ty);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("maxpool routes gradient only to argmax positions (brute force)") {
  Rng rng(109);
  PoolDims d;
  d.ch = 2;
  d.in_d = 1;
  d.in_h = 4;
  d.in_w = 4;
  d.k_d = 1;
  d.k_h = 2;
  d.k_w = 2;
  auto in = random_vec(d.in_size(), rng);
  std::vector<double> out(d.out_size());
  std::vector<size_t> am(d.out_size());
  maxpool3d_forward(in.data(), out.data(), am.data(), d);
  auto dout = random_vec(d.out_size(), rng);
  std::vector<double> din(d.in_size());
  maxpool3d_backward(am.data(), dout.data(), din.data(), d);

  // brute force: perturbing a non-argmax input must not change the output
  for (size_t i = 0; i < d.in_size(); ++i) {
    bool is_argmax = false;
    for (size_t o = 0; o < d.out_size(); ++o) is_argmax |= (am[o] == i);
    if (!is_argmax) CHECK(din[i] == 0.0);
  }
  double din_sum = 0.0, dout_sum = 0.0;
  for (double v : din) din_sum += v;
  for (double v : dout) dout_sum += v;
  CHECK(din_sum == doctest::Approx(dout_sum).epsilon(1e-12));
}

TEST_CASE("thread cap setting survives round trips") {
  set_max_threads(1);
  CHECK(effective_threads() == 1);
  set_max_threads(0);
  CHECK(effective_threads() >= 1);
}
