#pragma once

#include <cstddef>

namespace trajtensor::kernels {

// Thread cap for the OpenMP paths. 0 = use the OpenMP default. The
// parallel kernels partition work so that every output element is owned by
// exactly one thread and accumulated in the same order as the serial
// reference, so results are bitwise identical at any thread count.
void set_max_threads(int n);
int effective_threads();

/// Stride-1 zero-padded 3D convolution geometry. Tensors are channels-first
/// row-major: input (in_ch, in_d, in_h, in_w), weight
/// (out_ch, in_ch, k_d, k_h, k_w), output (out_ch, out_d, out_h, out_w).
struct ConvDims {
  size_t in_ch = 1, out_ch = 1;
  size_t in_d = 1, in_h = 1, in_w = 1;
  size_t k_d = 1, k_h = 1, k_w = 1;
  size_t p_d = 0, p_h = 0, p_w = 0;

  size_t out_d() const { return in_d + 2 * p_d - k_d + 1; }
  size_t out_h() const { return in_h + 2 * p_h - k_h + 1; }
  size_t out_w() const { return in_w + 2 * p_w - k_w + 1; }
  size_t in_size() const { return in_ch * in_d * in_h * in_w; }
  size_t out_size() const { return out_ch * out_d() * out_h() * out_w(); }
  size_t weight_size() const { return out_ch * in_ch * k_d * k_h * k_w; }
};

/// Strided transposed 3D convolution (the adjoint of ConvDims at stride 1).
/// Weight layout (in_ch, out_ch, k_d, k_h, k_w); output dim per axis is
/// (in - 1) * stride + k - 2 * pad.
struct TConvDims {
  size_t in_ch = 1, out_ch = 1;
  size_t in_d = 1, in_h = 1, in_w = 1;
  size_t k_d = 1, k_h = 1, k_w = 1;
  size_t s_d = 1, s_h = 1, s_w = 1;
  size_t p_d = 0, p_h = 0, p_w = 0;

  size_t out_d() const { return (in_d - 1) * s_d + k_d - 2 * p_d; }
  size_t out_h() const { return (in_h - 1) * s_h + k_h - 2 * p_h; }
  size_t out_w() const { return (in_w - 1) * s_w + k_w - 2 * p_w; }
  size_t in_size() const { return in_ch * in_d * in_h * in_w; }
  size_t out_size() const { return out_ch * out_d() * out_h() * out_w(); }
  size_t weight_size() const { return in_ch * out_ch * k_d * k_h * k_w; }
};

/// Non-overlapping max pooling; kernel doubles as stride, output dims floor.
struct PoolDims {
  size_t ch = 1;
  size_t in_d = 1, in_h = 1, in_w = 1;
  size_t k_d = 1, k_h = 1, k_w = 1;

  size_t out_d() const { return in_d / k_d; }
  size_t out_h() const { return in_h / k_h; }
  size_t out_w() const { return in_w / k_w; }
  size_t in_size() const { return ch * in_d * in_h * in_w; }
  size_t out_size() const { return ch * out_d() * out_h() * out_w(); }
};

// OpenMP-parallel kernels (the production path).
void conv3d_forward(const double* in, const double* weight, const double* bias, double* out,
                    const ConvDims& d);
void conv3d_backward_input(const double* weight, const double* d_out, double* d_in,
                           const ConvDims& d);
// Parameter gradients accumulate (+=) so batches can be summed in place.
void conv3d_backward_params(const double* in, const double* d_out, double* d_weight,
                            double* d_bias, const ConvDims& d);

void tconv3d_forward(const double* in, const double* weight, const double* bias, double* out,
                     const TConvDims& d);
void tconv3d_backward_input(const double* weight, const double* d_out, double* d_in,
                            const TConvDims& d);
void tconv3d_backward_params(const double* in, const double* d_out, double* d_weight,
                             double* d_bias, const TConvDims& d);

void maxpool3d_forward(const double* in, double* out, size_t* argmax, const PoolDims& d);
// d_in must be zero-filled by the caller; gradient routes to argmax only.
void maxpool3d_backward(const size_t* argmax, const double* d_out, double* d_in,
                        const PoolDims& d);

void dense_forward(const double* weight, const double* bias, const double* x, double* y,
                   size_t out_n, size_t in_n);
void dense_backward_input(const double* weight, const double* dy, double* dx, size_t out_n,
                          size_t in_n);
void dense_backward_params(const double* x, const double* dy, double* d_weight, double* d_bias,
                           size_t out_n, size_t in_n);

// Plain serial loops, kept as the oracle the parallel kernels are tested
// against and as the baseline for the kernel benchmark.
namespace reference {
void conv3d_forward(const double* in, const double* weight, const double* bias, double* out,
                    const ConvDims& d);
void conv3d_backward_input(const double* weight, const double* d_out, double* d_in,
                           const ConvDims& d);
void conv3d_backward_params(const double* in, const double* d_out, double* d_weight,
                            double* d_bias, const ConvDims& d);
void tconv3d_forward(const double* in, const double* weight, const double* bias, double* out,
                     const TConvDims& d);
void tconv3d_backward_input(const double* weight, const double* d_out, double* d_in,
                            const TConvDims& d);
void tconv3d_backward_params(const double* in, const double* d_out, double* d_weight,
                             double* d_bias, const TConvDims& d);
void maxpool3d_forward(const double* in, double* out, size_t* argmax, const PoolDims& d);
void maxpool3d_backward(const size_t* argmax, const double* d_out, double* d_in,
                        const PoolDims& d);
void dense_forward(const double* weight, const double* bias, const double* x, double* y,
                   size_t out_n, size_t in_n);
void dense_backward_input(const double* weight, const double* dy, double* dx, size_t out_n,
                          size_t in_n);
void dense_backward_params(const double* x, const double* dy, double* d_weight, double* d_bias,
                           size_t out_n, size_t in_n);
}  // namespace reference

}  // namespace trajtensor::kernels
