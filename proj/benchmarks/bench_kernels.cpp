// Times the OpenMP kernels against the serial reference on training-sized
// shapes and verifies both paths agree bitwise.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "trajtensor/kernels.hpp"
#include "trajtensor/rng.hpp"

using namespace trajtensor;
using Clock = std::chrono::steady_clock;

namespace {

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

void fill_random(std::vector<double>& v, Rng& rng) {
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Timing {
  double serial = 0.0, parallel = 0.0;
  bool match = false;
};

template <typename SerialFn, typename ParallelFn>
Timing time_pair(int reps, std::vector<double>& out_serial, std::vector<double>& out_parallel,
                 SerialFn serial_fn, ParallelFn parallel_fn) {
  Timing t;
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) serial_fn(out_serial.data());
  auto t1 = Clock::now();
  for (int r = 0; r < reps; ++r) parallel_fn(out_parallel.data());
  auto t2 = Clock::now();
  t.serial = seconds(t0, t1) / reps;
  t.parallel = seconds(t1, t2) / reps;
  t.match = bitwise_equal(out_serial, out_parallel);
  return t;
}

void report(const char* name, const Timing& t) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   bitwise %s\n", name,
              t.serial * 1e3, t.parallel * 1e3, t.serial / t.parallel,
              t.match ? "match" : "MISMATCH");
}

}  // namespace

int main() {
  Rng rng(42);
  std::printf("kernel benchmark, %d thread(s)\n", kernels::effective_threads());

  {
    // Encoder-sized convolution: 5 camera channels over (10, 9, 16).
    kernels::ConvDims d;
    d.in_ch = 5; d.out_ch = 32;
    d.in_d = 10; d.in_h = 9; d.in_w = 16;
    d.k_d = d.k_h = d.k_w = 3;
    d.p_d = d.p_h = d.p_w = 1;
    std::vector<double> in(d.in_size()), w(d.weight_size()), b(d.out_ch);
    fill_random(in, rng);
    fill_random(w, rng);
    fill_random(b, rng);
    std::vector<double> out_s(d.out_size()), out_p(d.out_size());
    auto t = time_pair(
        20, out_s, out_p,
        [&](double* o) { kernels::reference::conv3d_forward(in.data(), w.data(), b.data(), o, d); },
        [&](double* o) { kernels::conv3d_forward(in.data(), w.data(), b.data(), o, d); });
    report("conv3d fwd 5->32 @10x9x16", t);

    std::vector<double> dout(d.out_size());
    fill_random(dout, rng);
    std::vector<double> din_s(d.in_size()), din_p(d.in_size());
    t = time_pair(
        20, din_s, din_p,
        [&](double* o) { kernels::reference::conv3d_backward_input(w.data(), dout.data(), o, d); },
        [&](double* o) { kernels::conv3d_backward_input(w.data(), dout.data(), o, d); });
    report("conv3d bwd-input", t);

    std::vector<double> dw_s(d.weight_size()), dw_p(d.weight_size()), db_s(d.out_ch),
        db_p(d.out_ch);
    t = time_pair(
        20, dw_s, dw_p,
        [&](double* o) {
          std::memset(o, 0, d.weight_size() * sizeof(double));
          std::memset(db_s.data(), 0, db_s.size() * sizeof(double));
          kernels::reference::conv3d_backward_params(in.data(), dout.data(), o, db_s.data(), d);
        },
        [&](double* o) {
          std::memset(o, 0, d.weight_size() * sizeof(double));
          std::memset(db_p.data(), 0, db_p.size() * sizeof(double));
          kernels::conv3d_backward_params(in.data(), dout.data(), o, db_p.data(), d);
        });
    report("conv3d bwd-params", t);
  }

  {
    // Decoder-sized transposed convolution.
    kernels::TConvDims d;
    d.in_ch = 8; d.out_ch = 8;
    d.in_d = 30; d.in_h = 6; d.in_w = 8;
    d.k_d = d.k_h = d.k_w = 4;
    d.s_d = d.s_h = d.s_w = 2;
    d.p_d = d.p_h = d.p_w = 1;
    std::vector<double> in(d.in_size()), w(d.weight_size()), b(d.out_ch);
    fill_random(in, rng);
    fill_random(w, rng);
    fill_random(b, rng);
    std::vector<double> out_s(d.out_size()), out_p(d.out_size());
    auto t = time_pair(
        20, out_s, out_p,
        [&](double* o) { kernels::reference::tconv3d_forward(in.data(), w.data(), b.data(), o, d); },
        [&](double* o) { kernels::tconv3d_forward(in.data(), w.data(), b.data(), o, d); });
    report("tconv3d fwd 8->8 s2", t);
  }

  {
    // Classifier-head matvec.
    size_t out_n = 512, in_n = 4096;
    std::vector<double> w(out_n * in_n), b(out_n), x(in_n);
    fill_random(w, rng);
    fill_random(b, rng);
    fill_random(x, rng);
    std::vector<double> y_s(out_n), y_p(out_n);
    auto t = time_pair(
        200, y_s, y_p,
        [&](double* o) { kernels::reference::dense_forward(w.data(), b.data(), x.data(), o, out_n, in_n); },
        [&](double* o) { kernels::dense_forward(w.data(), b.data(), x.data(), o, out_n, in_n); });
    report("dense fwd 4096->512", t);
  }

  return 0;
}
