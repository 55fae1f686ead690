#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "trajtensor/kernels.hpp"
#include "trajtensor/rng.hpp"
#include "trajtensor/tensor.hpp"

namespace trajtensor::nn {

constexpr size_t npos = std::numeric_limits<size_t>::max();

struct Param {
  std::string name;
  DenseTensor value;
  DenseTensor grad;
};

/// Ordered collection of named parameters. Layers register parameters here
/// and keep indices; gradients live next to values so forward/backward never
/// mutate parameters themselves.
class ParamStore {
 public:
  size_t add(std::string name, std::vector<size_t> shape);
  Param& param(size_t id) { return params_[id]; }
  const Param& param(size_t id) const { return params_[id]; }
  size_t count() const { return params_.size(); }
  size_t find(const std::string& name) const;
  size_t total_values() const;
  void zero_grads();

 private:
  std::vector<Param> params_;
};

/// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
void glorot_init(DenseTensor& t, size_t fan_in, size_t fan_out, Rng& rng);

/// Per-call activation cache owned by the caller; a layer stores whatever
/// its backward needs here.
struct Cache {
  DenseTensor input;
  DenseTensor output;
  std::vector<size_t> argmax;
  bool ready = false;
};

struct Dense {
  size_t w = npos, b = npos;
  size_t in_n = 0, out_n = 0;

  static Dense create(ParamStore& store, const std::string& prefix, size_t in_n, size_t out_n,
                      Rng& rng);
  DenseTensor forward(const ParamStore& store, const DenseTensor& x, Cache& cache) const;
  DenseTensor backward(ParamStore& store, const Cache& cache, const DenseTensor& dy) const;
};

/// Stride-1 "same"-padded convolution over 1, 2 or 3 spatial dims. Input is
/// channels-first: (C,L), (C,H,W) or (C,D,H,W); lower ranks run through the
/// 3D kernels with singleton dims.
struct Conv {
  int spatial_rank = 3;
  size_t in_ch = 0, out_ch = 0;
  size_t k[3] = {1, 1, 1};
  size_t pad[3] = {0, 0, 0};
  size_t w = npos, b = npos;

  static Conv create(ParamStore& store, const std::string& prefix, int spatial_rank, size_t in_ch,
                     size_t out_ch, size_t kernel, Rng& rng);
  DenseTensor forward(const ParamStore& store, const DenseTensor& x, Cache& cache) const;
  DenseTensor backward(ParamStore& store, const Cache& cache, const DenseTensor& dy) const;

  kernels::ConvDims dims_for(const std::vector<size_t>& in_shape) const;
};

/// Strided transposed convolution, the adjoint of Conv for matching weights.
struct TConv {
  int spatial_rank = 3;
  size_t in_ch = 0, out_ch = 0;
  size_t k[3] = {1, 1, 1};
  size_t stride[3] = {1, 1, 1};
  size_t pad[3] = {0, 0, 0};
  size_t w = npos, b = npos;

  static TConv create(ParamStore& store, const std::string& prefix, int spatial_rank, size_t in_ch,
                      size_t out_ch, size_t kernel, size_t stride, size_t pad, Rng& rng);
  DenseTensor forward(const ParamStore& store, const DenseTensor& x, Cache& cache) const;
  DenseTensor backward(ParamStore& store, const Cache& cache, const DenseTensor& dy) const;

  kernels::TConvDims dims_for(const std::vector<size_t>& in_shape) const;
};

/// Non-overlapping max pool; window clamps to 1 on axes shorter than it so
/// late stages keep working once a dimension has collapsed.
struct MaxPool {
  int spatial_rank = 3;
  size_t k[3] = {2, 2, 2};

  static MaxPool create(int spatial_rank, size_t kernel);
  DenseTensor forward(const DenseTensor& x, Cache& cache) const;
  DenseTensor backward(const Cache& cache, const DenseTensor& dy) const;
};

DenseTensor relu(const DenseTensor& x);
DenseTensor relu_backward(const DenseTensor& x, const DenseTensor& dy);
double sigmoid_scalar(double x);
DenseTensor sigmoid(const DenseTensor& x);
// Takes the forward output, since sigma' = y (1 - y).
DenseTensor sigmoid_backward(const DenseTensor& y, const DenseTensor& dy);

/// GRU cell in the Cho convention:
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
///   hc = tanh(Wh x + Uh (r*h) + bh), h' = (1-z)*h + z*hc.
/// in_n may be 0 for input-free decoder rollouts.
struct GruCell {
  size_t in_n = 0, hidden_n = 0;
  size_t wz = npos, uz = npos, bz = npos;
  size_t wr = npos, ur = npos, br = npos;
  size_t wh = npos, uh = npos, bh = npos;

  struct Step {
    DenseTensor x, h_prev, z, r, hcand;
  };

  static GruCell create(ParamStore& store, const std::string& prefix, size_t in_n, size_t hidden_n,
                        Rng& rng);
  DenseTensor forward(const ParamStore& store, const DenseTensor& x, const DenseTensor& h_prev,
                      Step& step) const;
  // Returns dh_prev and (when in_n > 0) writes dx.
  DenseTensor backward(ParamStore& store, const Step& step, const DenseTensor& dh_next,
                       DenseTensor* dx) const;
};

/// Standard LSTM with forget/input/output gates; forget bias starts at 1.
struct LstmCell {
  size_t in_n = 0, hidden_n = 0;
  size_t wi = npos, ui = npos, bi = npos;
  size_t wf = npos, uf = npos, bf = npos;
  size_t wo = npos, uo = npos, bo = npos;
  size_t wg = npos, ug = npos, bg = npos;

  struct Step {
    DenseTensor x, h_prev, c_prev, i, f, o, g, c_next;
  };

  static LstmCell create(ParamStore& store, const std::string& prefix, size_t in_n,
                         size_t hidden_n, Rng& rng);
  void forward(const ParamStore& store, const DenseTensor& x, const DenseTensor& h_prev,
               const DenseTensor& c_prev, DenseTensor& h_next, DenseTensor& c_next,
               Step& step) const;
  void backward(ParamStore& store, const Step& step, const DenseTensor& dh_next,
                const DenseTensor& dc_next, DenseTensor& dh_prev, DenseTensor& dc_prev,
                DenseTensor* dx) const;
};

/// Mean binary cross-entropy. Targets must be exactly 0 or 1; predictions
/// are clamped to [1e-7, 1-1e-7] inside the logs.
double bce_loss(const DenseTensor& pred, const DenseTensor& target, DenseTensor* d_pred = nullptr);
/// Same loss for soft targets in [0,1] (autoencoder reconstruction).
double bce_loss_soft(const DenseTensor& pred, const DenseTensor& target,
                     DenseTensor* d_pred = nullptr);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t step = 0;
  std::vector<DenseTensor> m, v;

  void init(const ParamStore& store);
  bool initialized() const { return !m.empty(); }
};

/// Bias-corrected Adam update from the gradients in the store.
void adam_step(AdamState& state, ParamStore& store);

struct GradCheckBlock {
  std::string name;
  double max_rel_err = 0.0;
  size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double max_rel_err() const;
  bool pass(double tolerance) const { return max_rel_err() <= tolerance; }
};

/// Compares analytic gradients against central finite differences.
/// eval(true) must run forward+backward and leave gradients in the store;
/// eval(false) must return the loss without touching gradients.
/// max_per_block = 0 checks every parameter; otherwise a deterministic
/// strided subset per block.
GradCheckReport grad_check(ParamStore& store, const std::function<double(bool)>& eval,
                           double step = 1e-4, size_t max_per_block = 0);

// "TTWT" weight container: magic, version, u32 block count, then per block
// u16 name length + name + rank byte + u32 dims + f32 little-endian values.
// Adam moments are stored alongside under suffixed names when provided.
void save_weights(const std::string& path, const ParamStore& store,
                  const AdamState* adam = nullptr);
/// Loads into an existing store; names and shapes must match exactly.
void load_weights(const std::string& path, ParamStore& store, AdamState* adam = nullptr);

}  // namespace trajtensor::nn
