#include "trajtensor/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "trajtensor/errors.hpp"

namespace trajtensor::nn {

size_t ParamStore::add(std::string name, std::vector<size_t> shape) {
  if (find(name) != npos) throw InvalidInputError("duplicate parameter name: " + name);
  Param p;
  p.name = std::move(name);
  p.value = DenseTensor(shape);
  p.grad = DenseTensor(shape);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

size_t ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  return npos;
}

size_t ParamStore::total_values() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void glorot_init(DenseTensor& t, size_t fan_in, size_t fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense Dense::create(ParamStore& store, const std::string& prefix, size_t in_n, size_t out_n,
                    Rng& rng) {
  Dense d;
  d.in_n = in_n;
  d.out_n = out_n;
  d.w = store.add(prefix + ".w", {out_n, in_n});
  d.b = store.add(prefix + ".b", {out_n});
  glorot_init(store.param(d.w).value, in_n, out_n, rng);
  return d;
}

DenseTensor Dense::forward(const ParamStore& store, const DenseTensor& x, Cache& cache) const {
  if (x.size() != in_n)
    throw ShapeError("dense " + store.param(w).name + ": expected input of " +
                     std::to_string(in_n) + " values, got " + std::to_string(x.size()));
  DenseTensor y({out_n});
  kernels::dense_forward(store.param(w).value.data(), store.param(b).value.data(), x.data(),
                         y.data(), out_n, in_n);
  cache.input = x;
  cache.ready = true;
  return y;
}

DenseTensor Dense::backward(ParamStore& store, const Cache& cache, const DenseTensor& dy) const {
  if (!cache.ready) throw StateError("dense backward before forward");
  if (dy.size() != out_n) throw ShapeError("dense backward: upstream size mismatch");
  kernels::dense_backward_params(cache.input.data(), dy.data(), store.param(w).grad.data(),
                                 store.param(b).grad.data(), out_n, in_n);
  DenseTensor dx(cache.input.shape());
  kernels::dense_backward_input(store.param(w).value.data(), dy.data(), dx.data(), out_n, in_n);
  return dx;
}

// ---------------------------------------------------------------------------
// Conv / TConv / MaxPool
// ---------------------------------------------------------------------------

namespace {

void check_channels_first(const DenseTensor& x, int spatial_rank, size_t ch, const char* what) {
  if (x.rank() != size_t(spatial_rank) + 1 || x.dim(0) != ch)
    throw ShapeError(std::string(what) + ": expected (" + std::to_string(ch) + ", spatial^" +
                     std::to_string(spatial_rank) + "), got " +
                     DenseTensor::shape_string(x.shape()));
}

// (d,h,w) triple from a channels-first shape, left-padded with 1s.
void lift_spatial(const std::vector<size_t>& shape, int spatial_rank, size_t out[3]) {
  out[0] = out[1] = out[2] = 1;
  for (int i = 0; i < spatial_rank; ++i) out[3 - spatial_rank + i] = shape[size_t(i) + 1];
}

std::vector<size_t> drop_singletons(size_t ch, const size_t dhw[3], int spatial_rank) {
  std::vector<size_t> shape{ch};
  for (int i = 0; i < spatial_rank; ++i) shape.push_back(dhw[3 - spatial_rank + i]);
  return shape;
}

}  // namespace

Conv Conv::create(ParamStore& store, const std::string& prefix, int spatial_rank, size_t in_ch,
                  size_t out_ch, size_t kernel, Rng& rng) {
  Conv c;
  c.spatial_rank = spatial_rank;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  size_t kvol = 1;
  std::vector<size_t> wshape{out_ch, in_ch};
  for (int i = 0; i < 3; ++i) {
    bool active = i >= 3 - spatial_rank;
    c.k[i] = active ? kernel : 1;
    c.pad[i] = active ? kernel / 2 : 0;  // "same" padding, odd kernels
    kvol *= c.k[i];
  }
  for (int i = 3 - spatial_rank; i < 3; ++i) wshape.push_back(c.k[i]);
  c.w = store.add(prefix + ".w", wshape);
  c.b = store.add(prefix + ".b", {out_ch});
  glorot_init(store.param(c.w).value, in_ch * kvol, out_ch * kvol, rng);
  return c;
}

kernels::ConvDims Conv::dims_for(const std::vector<size_t>& in_shape) const {
  kernels::ConvDims d;
  d.in_ch = in_ch;
  d.out_ch = out_ch;
  size_t dhw[3];
  lift_spatial(in_shape, spatial_rank, dhw);
  d.in_d = dhw[0]; d.in_h = dhw[1]; d.in_w = dhw[2];
  d.k_d = k[0]; d.k_h = k[1]; d.k_w = k[2];
  d.p_d = pad[0]; d.p_h = pad[1]; d.p_w = pad[2];
  return d;
}

DenseTensor Conv::forward(const ParamStore& store, const DenseTensor& x, Cache& cache) const {
  check_channels_first(x, spatial_rank, in_ch, "conv");
  auto d = dims_for(x.shape());
  size_t out_dhw[3] = {d.out_d(), d.out_h(), d.out_w()};
  DenseTensor y(drop_singletons(out_ch, out_dhw, spatial_rank));
  kernels::conv3d_forward(x.data(), store.param(w).value.data(), store.param(b).value.data(),
                          y.data(), d);
  cache.input = x;
  cache.ready = true;
  return y;
}

DenseTensor Conv::backward(ParamStore& store, const Cache& cache, const DenseTensor& dy) const {
  if (!cache.ready) throw StateError("conv backward before forward");
  auto d = dims_for(cache.input.shape());
  if (dy.size() != d.out_size()) throw ShapeError("conv backward: upstream size mismatch");
  kernels::conv3d_backward_params(cache.input.data(), dy.data(), store.param(w).grad.data(),
                                  store.param(b).grad.data(), d);
  DenseTensor dx(cache.input.shape());
  kernels::conv3d_backward_input(store.param(w).value.data(), dy.data(), dx.data(), d);
  return dx;
}

TConv TConv::create(ParamStore& store, const std::string& prefix, int spatial_rank, size_t in_ch,
                    size_t out_ch, size_t kernel, size_t stride, size_t pad, Rng& rng) {
  TConv c;
  c.spatial_rank = spatial_rank;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  size_t kvol = 1;
  std::vector<size_t> wshape{in_ch, out_ch};
  for (int i = 0; i < 3; ++i) {
    bool active = i >= 3 - spatial_rank;
    c.k[i] = active ? kernel : 1;
    c.stride[i] = active ? stride : 1;
    c.pad[i] = active ? pad : 0;
    kvol *= c.k[i];
  }
  for (int i = 3 - spatial_rank; i < 3; ++i) wshape.push_back(c.k[i]);
  c.w = store.add(prefix + ".w", wshape);
  c.b = store.add(prefix + ".b", {out_ch});
  glorot_init(store.param(c.w).value, in_ch * kvol, out_ch * kvol, rng);
  return c;
}

kernels::TConvDims TConv::dims_for(const std::vector<size_t>& in_shape) const {
  kernels::TConvDims d;
  d.in_ch = in_ch;
  d.out_ch = out_ch;
  size_t dhw[3];
  lift_spatial(in_shape, spatial_rank, dhw);
  d.in_d = dhw[0]; d.in_h = dhw[1]; d.in_w = dhw[2];
  d.k_d = k[0]; d.k_h = k[1]; d.k_w = k[2];
  d.s_d = stride[0]; d.s_h = stride[1]; d.s_w = stride[2];
  d.p_d = pad[0]; d.p_h = pad[1]; d.p_w = pad[2];
  return d;
}

DenseTensor TConv::forward(const ParamStore& store, const DenseTensor& x, Cache& cache) const {
  check_channels_first(x, spatial_rank, in_ch, "tconv");
  auto d = dims_for(x.shape());
  size_t out_dhw[3] = {d.out_d(), d.out_h(), d.out_w()};
  DenseTensor y(drop_singletons(out_ch, out_dhw, spatial_rank));
  kernels::tconv3d_forward(x.data(), store.param(w).value.data(), store.param(b).value.data(),
                           y.data(), d);
  cache.input = x;
  cache.ready = true;
  return y;
}

DenseTensor TConv::backward(ParamStore& store, const Cache& cache, const DenseTensor& dy) const {
  if (!cache.ready) throw StateError("tconv backward before forward");
  auto d = dims_for(cache.input.shape());
  if (dy.size() != d.out_size()) throw ShapeError("tconv backward: upstream size mismatch");
  kernels::tconv3d_backward_params(cache.input.data(), dy.data(), store.param(w).grad.data(),
                                   store.param(b).grad.data(), d);
  DenseTensor dx(cache.input.shape());
  kernels::tconv3d_backward_input(store.param(w).value.data(), dy.data(), dx.data(), d);
  return dx;
}

MaxPool MaxPool::create(int spatial_rank, size_t kernel) {
  MaxPool p;
  p.spatial_rank = spatial_rank;
  for (int i = 0; i < 3; ++i) p.k[i] = i >= 3 - spatial_rank ? kernel : 1;
  return p;
}

DenseTensor MaxPool::forward(const DenseTensor& x, Cache& cache) const {
  if (x.rank() != size_t(spatial_rank) + 1)
    throw ShapeError("maxpool: expected channels-first rank " + std::to_string(spatial_rank + 1));
  kernels::PoolDims d;
  d.ch = x.dim(0);
  size_t dhw[3];
  lift_spatial(x.shape(), spatial_rank, dhw);
  d.in_d = dhw[0]; d.in_h = dhw[1]; d.in_w = dhw[2];
  // Collapse the window on axes already shorter than it.
  d.k_d = std::min(k[0], d.in_d);
  d.k_h = std::min(k[1], d.in_h);
  d.k_w = std::min(k[2], d.in_w);
  size_t out_dhw[3] = {d.out_d(), d.out_h(), d.out_w()};
  DenseTensor y(drop_singletons(d.ch, out_dhw, spatial_rank));
  cache.argmax.assign(y.size(), 0);
  kernels::maxpool3d_forward(x.data(), y.data(), cache.argmax.data(), d);
  cache.input = x;
  cache.ready = true;
  return y;
}

DenseTensor MaxPool::backward(const Cache& cache, const DenseTensor& dy) const {
  if (!cache.ready) throw StateError("maxpool backward before forward");
  if (dy.size() != cache.argmax.size()) throw ShapeError("maxpool backward: size mismatch");
  DenseTensor dx(cache.input.shape());
  for (size_t o = 0; o < cache.argmax.size(); ++o) dx[cache.argmax[o]] += dy[o];
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

DenseTensor relu(const DenseTensor& x) {
  DenseTensor y = x;
  for (size_t i = 0; i < y.size(); ++i)
    if (y[i] < 0.0) y[i] = 0.0;
  return y;
}

DenseTensor relu_backward(const DenseTensor& x, const DenseTensor& dy) {
  DenseTensor dx = dy;
  for (size_t i = 0; i < dx.size(); ++i)
    if (x[i] <= 0.0) dx[i] = 0.0;
  return dx;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

DenseTensor sigmoid(const DenseTensor& x) {
  DenseTensor y = x;
  for (size_t i = 0; i < y.size(); ++i) y[i] = sigmoid_scalar(y[i]);
  return y;
}

DenseTensor sigmoid_backward(const DenseTensor& y, const DenseTensor& dy) {
  DenseTensor dx = dy;
  for (size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (1.0 - y[i]);
  return dx;
}

// ---------------------------------------------------------------------------
// Recurrent cells
// ---------------------------------------------------------------------------

namespace {

// a = U h + b, optionally += W x
DenseTensor gate_preact(const ParamStore& store, size_t u, size_t b, size_t w_opt,
                        const DenseTensor& h, const DenseTensor& x, size_t in_n, size_t hidden_n) {
  DenseTensor a({hidden_n});
  kernels::dense_forward(store.param(u).value.data(), store.param(b).value.data(), h.data(),
                         a.data(), hidden_n, hidden_n);
  if (in_n > 0) {
    DenseTensor ax({hidden_n});
    kernels::dense_forward(store.param(w_opt).value.data(), nullptr, x.data(), ax.data(), hidden_n,
                           in_n);
    for (size_t i = 0; i < hidden_n; ++i) a[i] += ax[i];
  }
  return a;
}

// Accumulates parameter grads for one gate and adds the U-path and W-path
// input gradients into dh / dx.
void gate_backward(ParamStore& store, size_t u, size_t b, size_t w_opt, const DenseTensor& h,
                   const DenseTensor& x, const DenseTensor& da, DenseTensor& dh, DenseTensor* dx,
                   size_t in_n, size_t hidden_n) {
  kernels::dense_backward_params(h.data(), da.data(), store.param(u).grad.data(),
                                 store.param(b).grad.data(), hidden_n, hidden_n);
  DenseTensor tmp({hidden_n});
  kernels::dense_backward_input(store.param(u).value.data(), da.data(), tmp.data(), hidden_n,
                                hidden_n);
  for (size_t i = 0; i < hidden_n; ++i) dh[i] += tmp[i];
  if (in_n > 0) {
    kernels::dense_backward_params(x.data(), da.data(), store.param(w_opt).grad.data(), nullptr,
                                   hidden_n, in_n);
    if (dx) {
      DenseTensor tx({in_n});
      kernels::dense_backward_input(store.param(w_opt).value.data(), da.data(), tx.data(),
                                    hidden_n, in_n);
      for (size_t i = 0; i < in_n; ++i) (*dx)[i] += tx[i];
    }
  }
}

}  // namespace

GruCell GruCell::create(ParamStore& store, const std::string& prefix, size_t in_n, size_t hidden_n,
                        Rng& rng) {
  GruCell c;
  c.in_n = in_n;
  c.hidden_n = hidden_n;
  auto mat = [&](const char* name, size_t rows, size_t cols) {
    size_t id = store.add(prefix + "." + name, {rows, cols});
    glorot_init(store.param(id).value, cols, rows, rng);
    return id;
  };
  if (in_n > 0) {
    c.wz = mat("wz", hidden_n, in_n);
    c.wr = mat("wr", hidden_n, in_n);
    c.wh = mat("wh", hidden_n, in_n);
  }
  c.uz = mat("uz", hidden_n, hidden_n);
  c.ur = mat("ur", hidden_n, hidden_n);
  c.uh = mat("uh", hidden_n, hidden_n);
  c.bz = store.add(prefix + ".bz", {hidden_n});
  c.br = store.add(prefix + ".br", {hidden_n});
  c.bh = store.add(prefix + ".bh", {hidden_n});
  return c;
}

DenseTensor GruCell::forward(const ParamStore& store, const DenseTensor& x,
                             const DenseTensor& h_prev, Step& step) const {
  if (h_prev.size() != hidden_n) throw ShapeError("gru: hidden state size mismatch");
  if (in_n > 0 && x.size() != in_n)
    throw ShapeError("gru: expected input of " + std::to_string(in_n) + " values, got " +
                     std::to_string(x.size()));
  DenseTensor z = sigmoid(gate_preact(store, uz, bz, wz, h_prev, x, in_n, hidden_n));
  DenseTensor r = sigmoid(gate_preact(store, ur, br, wr, h_prev, x, in_n, hidden_n));
  DenseTensor rh({hidden_n});
  for (size_t i = 0; i < hidden_n; ++i) rh[i] = r[i] * h_prev[i];
  DenseTensor hcand = gate_preact(store, uh, bh, wh, rh, x, in_n, hidden_n);
  for (size_t i = 0; i < hidden_n; ++i) hcand[i] = std::tanh(hcand[i]);

  DenseTensor h_next({hidden_n});
  for (size_t i = 0; i < hidden_n; ++i)
    h_next[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hcand[i];

  step.x = x;
  step.h_prev = h_prev;
  step.z = std::move(z);
  step.r = std::move(r);
  step.hcand = std::move(hcand);
  return h_next;
}

DenseTensor GruCell::backward(ParamStore& store, const Step& step, const DenseTensor& dh_next,
                              DenseTensor* dx) const {
  size_t n = hidden_n;
  if (step.h_prev.size() != n) throw StateError("gru backward before forward");
  DenseTensor dh_prev({n});
  DenseTensor da_z({n}), da_r({n}), da_h({n});

  // carry path and gate pre-activations
  for (size_t i = 0; i < n; ++i) {
    double dz = dh_next[i] * (step.hcand[i] - step.h_prev[i]);
    double dhc = dh_next[i] * step.z[i];
    dh_prev[i] = dh_next[i] * (1.0 - step.z[i]);
    da_z[i] = dz * step.z[i] * (1.0 - step.z[i]);
    da_h[i] = dhc * (1.0 - step.hcand[i] * step.hcand[i]);
  }

  // candidate gate sees r*h, so route its U-path through r
  DenseTensor rh({n}), d_rh({n});
  for (size_t i = 0; i < n; ++i) rh[i] = step.r[i] * step.h_prev[i];
  kernels::dense_backward_params(rh.data(), da_h.data(), store.param(uh).grad.data(),
                                 store.param(bh).grad.data(), n, n);
  kernels::dense_backward_input(store.param(uh).value.data(), da_h.data(), d_rh.data(), n, n);
  if (in_n > 0) {
    kernels::dense_backward_params(step.x.data(), da_h.data(), store.param(wh).grad.data(),
                                   nullptr, n, in_n);
    if (dx) {
      DenseTensor tx({in_n});
      kernels::dense_backward_input(store.param(wh).value.data(), da_h.data(), tx.data(), n, in_n);
      for (size_t i = 0; i < in_n; ++i) (*dx)[i] += tx[i];
    }
  }
  for (size_t i = 0; i < n; ++i) {
    dh_prev[i] += d_rh[i] * step.r[i];
    double dr = d_rh[i] * step.h_prev[i];
    da_r[i] = dr * step.r[i] * (1.0 - step.r[i]);
  }

  gate_backward(store, ur, br, wr, step.h_prev, step.x, da_r, dh_prev, dx, in_n, n);
  gate_backward(store, uz, bz, wz, step.h_prev, step.x, da_z, dh_prev, dx, in_n, n);
  return dh_prev;
}

LstmCell LstmCell::create(ParamStore& store, const std::string& prefix, size_t in_n,
                          size_t hidden_n, Rng& rng) {
  LstmCell c;
  c.in_n = in_n;
  c.hidden_n = hidden_n;
  auto mat = [&](const char* name, size_t rows, size_t cols) {
    size_t id = store.add(prefix + "." + name, {rows, cols});
    glorot_init(store.param(id).value, cols, rows, rng);
    return id;
  };
  if (in_n > 0) {
    c.wi = mat("wi", hidden_n, in_n);
    c.wf = mat("wf", hidden_n, in_n);
    c.wo = mat("wo", hidden_n, in_n);
    c.wg = mat("wg", hidden_n, in_n);
  }
  c.ui = mat("ui", hidden_n, hidden_n);
  c.uf = mat("uf", hidden_n, hidden_n);
  c.uo = mat("uo", hidden_n, hidden_n);
  c.ug = mat("ug", hidden_n, hidden_n);
  c.bi = store.add(prefix + ".bi", {hidden_n});
  c.bf = store.add(prefix + ".bf", {hidden_n});
  c.bo = store.add(prefix + ".bo", {hidden_n});
  c.bg = store.add(prefix + ".bg", {hidden_n});
  store.param(c.bf).value.fill(1.0);  // forget gate starts open
  return c;
}

void LstmCell::forward(const ParamStore& store, const DenseTensor& x, const DenseTensor& h_prev,
                       const DenseTensor& c_prev, DenseTensor& h_next, DenseTensor& c_next,
                       Step& step) const {
  if (h_prev.size() != hidden_n || c_prev.size() != hidden_n)
    throw ShapeError("lstm: state size mismatch");
  if (in_n > 0 && x.size() != in_n) throw ShapeError("lstm: input size mismatch");
  DenseTensor i = sigmoid(gate_preact(store, ui, bi, wi, h_prev, x, in_n, hidden_n));
  DenseTensor f = sigmoid(gate_preact(store, uf, bf, wf, h_prev, x, in_n, hidden_n));
  DenseTensor o = sigmoid(gate_preact(store, uo, bo, wo, h_prev, x, in_n, hidden_n));
  DenseTensor g = gate_preact(store, ug, bg, wg, h_prev, x, in_n, hidden_n);
  for (size_t j = 0; j < hidden_n; ++j) g[j] = std::tanh(g[j]);

  c_next = DenseTensor({hidden_n});
  h_next = DenseTensor({hidden_n});
  for (size_t j = 0; j < hidden_n; ++j) {
    c_next[j] = f[j] * c_prev[j] + i[j] * g[j];
    h_next[j] = o[j] * std::tanh(c_next[j]);
  }
  step.x = x;
  step.h_prev = h_prev;
  step.c_prev = c_prev;
  step.i = std::move(i);
  step.f = std::move(f);
  step.o = std::move(o);
  step.g = std::move(g);
  step.c_next = c_next;
}

void LstmCell::backward(ParamStore& store, const Step& step, const DenseTensor& dh_next,
                        const DenseTensor& dc_next, DenseTensor& dh_prev, DenseTensor& dc_prev,
                        DenseTensor* dx) const {
  size_t n = hidden_n;
  if (step.h_prev.size() != n) throw StateError("lstm backward before forward");
  DenseTensor da_i({n}), da_f({n}), da_o({n}), da_g({n});
  dh_prev = DenseTensor({n});
  dc_prev = DenseTensor({n});
  for (size_t j = 0; j < n; ++j) {
    double t = std::tanh(step.c_next[j]);
    double dc = dc_next[j] + dh_next[j] * step.o[j] * (1.0 - t * t);
    double d_o = dh_next[j] * t;
    double d_f = dc * step.c_prev[j];
    double d_i = dc * step.g[j];
    double d_g = dc * step.i[j];
    dc_prev[j] = dc * step.f[j];
    da_i[j] = d_i * step.i[j] * (1.0 - step.i[j]);
    da_f[j] = d_f * step.f[j] * (1.0 - step.f[j]);
    da_o[j] = d_o * step.o[j] * (1.0 - step.o[j]);
    da_g[j] = d_g * (1.0 - step.g[j] * step.g[j]);
  }
  gate_backward(store, ui, bi, wi, step.h_prev, step.x, da_i, dh_prev, dx, in_n, n);
  gate_backward(store, uf, bf, wf, step.h_prev, step.x, da_f, dh_prev, dx, in_n, n);
  gate_backward(store, uo, bo, wo, step.h_prev, step.x, da_o, dh_prev, dx, in_n, n);
  gate_backward(store, ug, bg, wg, step.h_prev, step.x, da_g, dh_prev, dx, in_n, n);
}

// ---------------------------------------------------------------------------
// Loss, optimizer, gradient checking
// ---------------------------------------------------------------------------

namespace {

constexpr double kBceEps = 1e-7;

double bce_impl(const DenseTensor& pred, const DenseTensor& target, DenseTensor* d_pred) {
  if (!pred.same_shape(target))
    throw ShapeError("bce: prediction " + DenseTensor::shape_string(pred.shape()) +
                     " vs target " + DenseTensor::shape_string(target.shape()));
  size_t n = pred.size();
  if (n == 0) throw InvalidInputError("bce: empty tensors");
  if (d_pred) *d_pred = DenseTensor(pred.shape());
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double y = target[i];
    double p = std::max(kBceEps, std::min(1.0 - kBceEps, pred[i]));
    loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    if (d_pred) (*d_pred)[i] = (-y / p + (1.0 - y) / (1.0 - p)) / double(n);
  }
  return loss / double(n);
}

}  // namespace

double bce_loss(const DenseTensor& pred, const DenseTensor& target, DenseTensor* d_pred) {
  for (size_t i = 0; i < target.size(); ++i)
    if (target[i] != 0.0 && target[i] != 1.0)
      throw InvalidInputError("bce: targets must be exactly 0 or 1");
  return bce_impl(pred, target, d_pred);
}

double bce_loss_soft(const DenseTensor& pred, const DenseTensor& target, DenseTensor* d_pred) {
  for (size_t i = 0; i < target.size(); ++i)
    if (target[i] < 0.0 || target[i] > 1.0)
      throw InvalidInputError("bce: soft targets must lie in [0,1]");
  return bce_impl(pred, target, d_pred);
}

void AdamState::init(const ParamStore& store) {
  m.clear();
  v.clear();
  for (size_t i = 0; i < store.count(); ++i) {
    m.emplace_back(store.param(i).value.shape());
    v.emplace_back(store.param(i).value.shape());
  }
  step = 0;
}

void adam_step(AdamState& state, ParamStore& store) {
  if (!state.initialized()) state.init(store);
  if (state.m.size() != store.count()) throw ShapeError("adam state does not match store");
  ++state.step;
  double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (size_t p = 0; p < store.count(); ++p) {
    auto& value = store.param(p).value;
    const auto& grad = store.param(p).grad;
    auto& mp = state.m[p];
    auto& vp = state.v[p];
    if (!mp.same_shape(value)) throw ShapeError("adam moment shape mismatch: " + store.param(p).name);
    for (size_t i = 0; i < value.size(); ++i) {
      double g = grad[i];
      mp[i] = state.beta1 * mp[i] + (1.0 - state.beta1) * g;
      vp[i] = state.beta2 * vp[i] + (1.0 - state.beta2) * g * g;
      double mhat = mp[i] / c1;
      double vhat = vp[i] / c2;
      value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double GradCheckReport::max_rel_err() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.max_rel_err);
  return m;
}

GradCheckReport grad_check(ParamStore& store, const std::function<double(bool)>& eval, double step,
                           size_t max_per_block) {
  store.zero_grads();
  eval(true);
  std::vector<DenseTensor> analytic;
  analytic.reserve(store.count());
  for (size_t p = 0; p < store.count(); ++p) analytic.push_back(store.param(p).grad);

  GradCheckReport report;
  for (size_t p = 0; p < store.count(); ++p) {
    auto& value = store.param(p).value;
    size_t n = value.size();
    std::vector<size_t> indices;
    if (max_per_block == 0 || n <= max_per_block) {
      indices.resize(n);
      for (size_t i = 0; i < n; ++i) indices[i] = i;
    } else {
      for (size_t j = 0; j < max_per_block; ++j) indices.push_back(j * n / max_per_block);
    }
    GradCheckBlock block;
    block.name = store.param(p).name;
    block.checked = indices.size();
    auto probe = [&](size_t i, double h) {
      double orig = value[i];
      value[i] = orig + h;
      double lp = eval(false);
      value[i] = orig - h;
      double lm = eval(false);
      value[i] = orig;
      return (lp - lm) / (2.0 * h);
    };
    auto rel_err = [](double a, double n) {
      return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-6});
    };
    for (size_t i : indices) {
      double a = analytic[p][i];
      double rel = rel_err(a, probe(i, step));
      if (rel > 1e-5) {
        // A coarse probe may straddle a relu kink; a finer step converges to
        // the true derivative there, while a genuine gradient bug stays.
        rel = std::min(rel, rel_err(a, probe(i, step / 16.0)));
      }
      block.max_rel_err = std::max(block.max_rel_err, rel);
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

// ---------------------------------------------------------------------------
// TTWT weight files
// ---------------------------------------------------------------------------

namespace {

constexpr char kWeightsMagic[4] = {'T', 'T', 'W', 'T'};
constexpr uint8_t kWeightsVersion = 0x01;

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                        (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

void write_block(std::ostream& out, const std::string& name, const DenseTensor& t) {
  uint16_t len = uint16_t(name.size());
  out.put(char(len & 0xff));
  out.put(char((len >> 8) & 0xff));
  out.write(name.data(), len);
  out.put(char(t.rank()));
  for (size_t d : t.shape()) put_u32(out, uint32_t(d));
  for (size_t i = 0; i < t.size(); ++i) {
    float f = float(t[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

std::pair<std::string, DenseTensor> read_block(std::istream& in) {
  int lo = in.get(), hi = in.get();
  if (lo < 0 || hi < 0) throw DataError("truncated TTWT block header");
  size_t len = size_t(lo) | (size_t(hi) << 8);
  std::string name(len, '\0');
  in.read(name.data(), std::streamsize(len));
  int rank = in.get();
  if (!in || rank < 0 || rank > 5) throw DataError("bad TTWT block rank");
  std::vector<size_t> shape;
  for (int i = 0; i < rank; ++i) shape.push_back(get_u32(in));
  DenseTensor t(shape);
  for (size_t i = 0; i < t.size(); ++i) {
    uint32_t bits = get_u32(in);
    float f;
    std::memcpy(&f, &bits, 4);
    t[i] = double(f);
  }
  if (!in) throw DataError("truncated TTWT block: " + name);
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_weights(const std::string& path, const ParamStore& store, const AdamState* adam) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(kWeightsMagic, 4);
  out.put(char(kWeightsVersion));
  uint32_t count = uint32_t(store.count());
  if (adam && adam->initialized()) count += uint32_t(2 * store.count() + 1);
  put_u32(out, count);
  for (size_t i = 0; i < store.count(); ++i)
    write_block(out, store.param(i).name, store.param(i).value);
  if (adam && adam->initialized()) {
    for (size_t i = 0; i < store.count(); ++i) {
      write_block(out, store.param(i).name + ".adam.m", adam->m[i]);
      write_block(out, store.param(i).name + ".adam.v", adam->v[i]);
    }
    DenseTensor meta({1});
    meta[0] = double(adam->step);
    write_block(out, "adam.step", meta);
  }
  if (!out) throw DataError("write failed: " + path);
}

void load_weights(const std::string& path, ParamStore& store, AdamState* adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kWeightsMagic, 4) != 0) throw DataError("not a TTWT file: " + path);
  int version = in.get();
  if (version != kWeightsVersion)
    throw DataError("unsupported TTWT version " + std::to_string(version));
  uint32_t count = get_u32(in);

  std::vector<std::pair<std::string, DenseTensor>> blocks;
  blocks.reserve(count);
  for (uint32_t i = 0; i < count; ++i) blocks.push_back(read_block(in));

  auto lookup = [&](const std::string& name) -> const DenseTensor* {
    for (const auto& [n, t] : blocks)
      if (n == name) return &t;
    return nullptr;
  };

  for (size_t i = 0; i < store.count(); ++i) {
    auto& p = store.param(i);
    const DenseTensor* t = lookup(p.name);
    if (!t) throw DataError("weight block missing: " + p.name);
    if (t->shape() != p.value.shape())
      throw DataError("weight block shape mismatch: " + p.name + " expected " +
                      DenseTensor::shape_string(p.value.shape()) + ", got " +
                      DenseTensor::shape_string(t->shape()));
    p.value = *t;
  }
  if (adam) {
    const DenseTensor* meta = lookup("adam.step");
    if (!meta) throw DataError("optimizer state missing in " + path);
    adam->init(store);
    adam->step = int64_t((*meta)[0]);
    for (size_t i = 0; i < store.count(); ++i) {
      const DenseTensor* m = lookup(store.param(i).name + ".adam.m");
      const DenseTensor* v = lookup(store.param(i).name + ".adam.v");
      if (!m || !v) throw DataError("optimizer moments missing: " + store.param(i).name);
      adam->m[i] = *m;
      adam->v[i] = *v;
    }
  }
}

}  // namespace trajtensor::nn
