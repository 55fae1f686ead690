#include "trajtensor/models.hpp"

#include <cmath>
#include <optional>

#include "trajtensor/errors.hpp"

namespace trajtensor::models {

const char* family_name(Family f) {
  switch (f) {
    case Family::gru: return "gru";
    case Family::lstm: return "lstm";
    case Family::cnn1d: return "cnn1d";
    case Family::cnn2d1d: return "cnn2d1d";
    case Family::cnn3d: return "cnn3d";
    case Family::cnn_gru: return "cnn_gru";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "gru") return Family::gru;
  if (name == "lstm") return Family::lstm;
  if (name == "cnn1d") return Family::cnn1d;
  if (name == "cnn2d1d") return Family::cnn2d1d;
  if (name == "cnn3d") return Family::cnn3d;
  if (name == "cnn_gru") return Family::cnn_gru;
  throw InvalidInputError("unknown model family: " + name);
}

bool is_coordinate(Family f) {
  return f == Family::gru || f == Family::lstm || f == Family::cnn1d;
}

bool is_recurrent_decoder(Family f) {
  return f == Family::gru || f == Family::lstm || f == Family::cnn_gru;
}

void ModelSpec::validate() const {
  if (cameras == 0 || horizon == 0 || observed == 0)
    throw ConfigError("model spec: cameras, horizon and observed length must be >= 1");
  if (channel_scale <= 0.0) throw ConfigError("model spec: channel_scale must be positive");
  if (target_w != 16 || target_h != 9)
    throw ConfigError("model spec: the target grid is fixed at 16x9");
  if (is_coordinate(family)) {
    if (bound_camera < 0 || size_t(bound_camera) >= cameras)
      throw ConfigError("coordinate families need a departure camera binding in [0,k)");
  } else if (bound_camera >= 0) {
    throw ConfigError("tensor families are unified across cameras; no camera binding");
  }
  bool conv_decoder = !is_recurrent_decoder(family);
  if (conv_decoder && task != metrics::Task::which && horizon % 4 != 0)
    throw ConfigError("transposed-conv decoders need a horizon divisible by 4");
}

namespace {

size_t scaled(double scale, size_t base) {
  auto v = (long long)std::llround(double(base) * scale);
  return v < 1 ? 1 : size_t(v);
}

}  // namespace

size_t ModelSpec::feature_size() const {
  return scaled(channel_scale, is_coordinate(family) ? 128 : 512);
}

std::vector<size_t> ModelSpec::input_shape() const {
  if (is_coordinate(family)) return {observed, 4};
  return {cameras, observed, grid_h, grid_w};
}

std::vector<size_t> ModelSpec::output_shape() const {
  switch (task) {
    case metrics::Task::which: return {cameras};
    case metrics::Task::when: return {cameras, horizon};
    case metrics::Task::where: return {cameras, horizon, target_h, target_w};
  }
  return {};
}

TrajectoryTensor single_view_mask(const TrajectoryTensor& z, size_t keep_camera) {
  if (keep_camera >= z.cameras())
    throw InvalidInputError("single_view_mask: camera " + std::to_string(keep_camera) +
                            " outside 0.." + std::to_string(z.cameras() - 1));
  TrajectoryTensor out = z;
  size_t slice = z.timesteps() * z.grid_h() * z.grid_w();
  double* data = out.tensor().data();
  for (size_t cam = 0; cam < z.cameras(); ++cam) {
    if (cam == keep_camera) continue;
    std::fill(data + cam * slice, data + (cam + 1) * slice, 0.0);
  }
  return out;
}

DenseTensor MctfModel::autoencode_forward(const DenseTensor&) {
  throw StateError(std::string(family_name(spec_.family)) + " has no autoencoder");
}

void MctfModel::autoencode_backward(const DenseTensor&) {
  throw StateError(std::string(family_name(spec_.family)) + " has no autoencoder");
}

// ===========================================================================
// Shared blocks
// ===========================================================================

namespace {

using nn::Cache;
using nn::ParamStore;

DenseTensor reshaped(const DenseTensor& x, std::vector<size_t> shape) {
  DenseTensor out(std::move(shape));
  if (out.size() != x.size()) throw ShapeError("reshape size mismatch");
  std::copy(x.data(), x.data() + x.size(), out.data());
  return out;
}

// Crop/pad on the trailing (H, W) axes; gradients zero-extend back.
DenseTensor crop_hw(const DenseTensor& x, size_t new_h, size_t new_w) {
  auto shape = x.shape();
  size_t rank = shape.size();
  size_t old_h = shape[rank - 2], old_w = shape[rank - 1];
  size_t outer = x.size() / (old_h * old_w);
  auto out_shape = shape;
  out_shape[rank - 2] = new_h;
  out_shape[rank - 1] = new_w;
  DenseTensor out(out_shape);
  for (size_t o = 0; o < outer; ++o)
    for (size_t r = 0; r < new_h; ++r)
      for (size_t c = 0; c < new_w; ++c)
        out[(o * new_h + r) * new_w + c] = x[(o * old_h + r) * old_w + c];
  return out;
}

DenseTensor pad_hw(const DenseTensor& x, size_t new_h, size_t new_w) {
  auto shape = x.shape();
  size_t rank = shape.size();
  size_t old_h = shape[rank - 2], old_w = shape[rank - 1];
  size_t outer = x.size() / (old_h * old_w);
  auto out_shape = shape;
  out_shape[rank - 2] = new_h;
  out_shape[rank - 1] = new_w;
  DenseTensor out(out_shape);
  for (size_t o = 0; o < outer; ++o)
    for (size_t r = 0; r < old_h; ++r)
      for (size_t c = 0; c < old_w; ++c)
        out[(o * new_h + r) * new_w + c] = x[(o * old_h + r) * old_w + c];
  return out;
}

struct ConvPoolCache {
  Cache conv, pool;
  DenseTensor pre_relu;
};

DenseTensor conv_pool_forward(const nn::Conv& conv, const nn::MaxPool& pool, ParamStore& store,
                              const DenseTensor& x, ConvPoolCache& c) {
  c.pre_relu = conv.forward(store, x, c.conv);
  return pool.forward(nn::relu(c.pre_relu), c.pool);
}

DenseTensor conv_pool_backward(const nn::Conv& conv, const nn::MaxPool& pool, ParamStore& store,
                               const ConvPoolCache& c, const DenseTensor& dy) {
  DenseTensor d = pool.backward(c.pool, dy);
  d = nn::relu_backward(c.pre_relu, d);
  return conv.backward(store, c.conv, d);
}

DenseTensor global_mean_pool(const DenseTensor& x) {
  size_t ch = x.dim(0), sp = x.size() / ch;
  DenseTensor out({ch});
  for (size_t c = 0; c < ch; ++c) {
    double acc = 0.0;
    const double* p = x.data() + c * sp;
    for (size_t i = 0; i < sp; ++i) acc += p[i];
    out[c] = acc / double(sp);
  }
  return out;
}

DenseTensor global_mean_pool_backward(const std::vector<size_t>& in_shape, const DenseTensor& dy) {
  DenseTensor dx(in_shape);
  size_t ch = in_shape[0], sp = dx.size() / ch;
  for (size_t c = 0; c < ch; ++c) {
    double g = dy[c] / double(sp);
    double* p = dx.data() + c * sp;
    for (size_t i = 0; i < sp; ++i) p[i] = g;
  }
  return dx;
}

// Dense + sigmoid classification head over the feature vector.
struct WhichHead {
  nn::Dense out;
  Cache cache;
  DenseTensor scores;

  void create(ParamStore& store, const std::string& prefix, size_t feature_n, size_t k, Rng& rng) {
    out = nn::Dense::create(store, prefix + ".out", feature_n, k, rng);
  }
  DenseTensor forward(ParamStore& store, const DenseTensor& feature) {
    scores = nn::sigmoid(out.forward(store, feature, cache));
    return scores;
  }
  DenseTensor backward(ParamStore& store, const DenseTensor& d_scores) {
    return out.backward(store, cache, nn::sigmoid_backward(scores, d_scores));
  }
};

// Input-free recurrent rollout: the feature seeds the initial state (both
// hidden and cell state for LSTM), then m cell steps. The hidden sequence
// feeds either a per-step readout (when) or the 2D upsampling head (where).
struct RecurrentRollout {
  bool use_lstm = false;
  size_t hidden = 0, steps = 0;
  nn::Dense h0_proj;  // feature -> hidden (GRU) or 2*hidden (LSTM: h0 | c0)
  nn::GruCell gru;
  nn::LstmCell lstm;

  Cache h0_cache;
  DenseTensor h0;  // post-tanh
  std::vector<nn::GruCell::Step> gsteps;
  std::vector<nn::LstmCell::Step> lsteps;
  std::vector<DenseTensor> hiddens;

  void create(ParamStore& store, const std::string& prefix, size_t feature_n, size_t hidden_n,
              size_t m, bool lstm_cell, Rng& rng) {
    use_lstm = lstm_cell;
    hidden = hidden_n;
    steps = m;
    h0_proj = nn::Dense::create(store, prefix + ".h0", feature_n,
                                use_lstm ? 2 * hidden_n : hidden_n, rng);
    if (use_lstm)
      lstm = nn::LstmCell::create(store, prefix + ".cell", 0, hidden_n, rng);
    else
      gru = nn::GruCell::create(store, prefix + ".cell", 0, hidden_n, rng);
  }

  const std::vector<DenseTensor>& forward(ParamStore& store, const DenseTensor& feature) {
    DenseTensor pre = h0_proj.forward(store, feature, h0_cache);
    h0 = DenseTensor({hidden});
    DenseTensor c({hidden});
    for (size_t i = 0; i < hidden; ++i) h0[i] = std::tanh(pre[i]);
    if (use_lstm)
      for (size_t i = 0; i < hidden; ++i) c[i] = pre[hidden + i];  // linear cell seed
    hiddens.assign(steps, DenseTensor());
    gsteps.assign(use_lstm ? 0 : steps, {});
    lsteps.assign(use_lstm ? steps : 0, {});
    DenseTensor h = h0;
    DenseTensor empty;
    for (size_t t = 0; t < steps; ++t) {
      if (use_lstm) {
        DenseTensor hn, cn;
        lstm.forward(store, empty, h, c, hn, cn, lsteps[t]);
        h = hn;
        c = std::move(cn);
      } else {
        h = gru.forward(store, empty, h, gsteps[t]);
      }
      hiddens[t] = h;
    }
    return hiddens;
  }

  DenseTensor backward(ParamStore& store, const std::vector<DenseTensor>& d_hiddens) {
    DenseTensor dh({hidden}), dc({hidden});
    for (size_t t = steps; t-- > 0;) {
      for (size_t i = 0; i < hidden; ++i) dh[i] += d_hiddens[t][i];
      if (use_lstm) {
        DenseTensor dhp, dcp;
        lstm.backward(store, lsteps[t], dh, dc, dhp, dcp, nullptr);
        dh = std::move(dhp);
        dc = std::move(dcp);
      } else {
        dh = gru.backward(store, gsteps[t], dh, nullptr);
      }
    }
    DenseTensor d_pre({use_lstm ? 2 * hidden : hidden});
    for (size_t i = 0; i < hidden; ++i) d_pre[i] = dh[i] * (1.0 - h0[i] * h0[i]);  // tanh'
    if (use_lstm)
      for (size_t i = 0; i < hidden; ++i) d_pre[hidden + i] = dc[i];
    return h0_proj.backward(store, h0_cache, d_pre);
  }
};

// Rollout + shared per-step dense readout -> (k, m) sigmoid scores.
struct RecurrentWhenHead {
  RecurrentRollout roll;
  nn::Dense readout;
  std::vector<Cache> readout_caches;
  DenseTensor scores;  // (k, m)
  size_t k = 0, m = 0;

  void create(ParamStore& store, const std::string& prefix, size_t feature_n, size_t hidden_n,
              size_t cameras, size_t horizon, bool lstm_cell, Rng& rng) {
    k = cameras;
    m = horizon;
    roll.create(store, prefix + ".roll", feature_n, hidden_n, horizon, lstm_cell, rng);
    readout = nn::Dense::create(store, prefix + ".readout", hidden_n, cameras, rng);
  }

  DenseTensor forward(ParamStore& store, const DenseTensor& feature) {
    const auto& hid = roll.forward(store, feature);
    readout_caches.assign(m, Cache());
    DenseTensor pre({k, m});
    for (size_t t = 0; t < m; ++t) {
      DenseTensor y = readout.forward(store, hid[t], readout_caches[t]);
      for (size_t c = 0; c < k; ++c) pre.at(c, t) = y[c];
    }
    scores = nn::sigmoid(pre);
    return scores;
  }

  DenseTensor backward(ParamStore& store, const DenseTensor& d_scores) {
    DenseTensor d_pre = nn::sigmoid_backward(scores, d_scores);
    std::vector<DenseTensor> d_hid(m);
    for (size_t t = 0; t < m; ++t) {
      DenseTensor dy({k});
      for (size_t c = 0; c < k; ++c) dy[c] = d_pre.at(c, t);
      d_hid[t] = readout.backward(store, readout_caches[t], dy);
    }
    return roll.backward(store, d_hid);
  }
};

// Four transposed 1D conv layers from the feature vector to a length-m
// sequence: expand to m/4, two stride-2 upsamplings, two refining layers.
struct ConvSeqDecoder {
  nn::Dense expand;
  nn::TConv t1, t2, t3, t4;
  size_t c0 = 0, c1 = 0, c2 = 0, len0 = 0, out_ch = 0, m = 0;
  bool final_sigmoid = true;

  Cache expand_cache, t1c, t2c, t3c, t4c;
  DenseTensor expand_pre, pre1, pre2, pre3, scores;

  void create(ParamStore& store, const std::string& prefix, size_t feature_n, size_t horizon,
              size_t out_channels, double scale, bool sigmoid_out, Rng& rng) {
    m = horizon;
    len0 = m / 4;
    out_ch = out_channels;
    final_sigmoid = sigmoid_out;
    c0 = scaled(scale, 64);
    c1 = scaled(scale, 32);
    c2 = scaled(scale, 16);
    expand = nn::Dense::create(store, prefix + ".expand", feature_n, c0 * len0, rng);
    t1 = nn::TConv::create(store, prefix + ".t1", 1, c0, c1, 4, 2, 1, rng);
    t2 = nn::TConv::create(store, prefix + ".t2", 1, c1, c2, 4, 2, 1, rng);
    t3 = nn::TConv::create(store, prefix + ".t3", 1, c2, c2, 3, 1, 1, rng);
    t4 = nn::TConv::create(store, prefix + ".t4", 1, c2, out_ch, 3, 1, 1, rng);
  }

  DenseTensor forward(ParamStore& store, const DenseTensor& feature) {
    expand_pre = expand.forward(store, feature, expand_cache);
    DenseTensor x = reshaped(nn::relu(expand_pre), {c0, len0});
    pre1 = t1.forward(store, x, t1c);
    pre2 = t2.forward(store, nn::relu(pre1), t2c);
    pre3 = t3.forward(store, nn::relu(pre2), t3c);
    DenseTensor out = t4.forward(store, nn::relu(pre3), t4c);
    scores = final_sigmoid ? nn::sigmoid(out) : std::move(out);
    return scores;
  }

  DenseTensor backward(ParamStore& store, const DenseTensor& d_out) {
    DenseTensor d = final_sigmoid ? nn::sigmoid_backward(scores, d_out) : d_out;
    d = t4.backward(store, t4c, d);
    d = nn::relu_backward(pre3, d);
    d = t3.backward(store, t3c, d);
    d = nn::relu_backward(pre2, d);
    d = t2.backward(store, t2c, d);
    d = nn::relu_backward(pre1, d);
    d = t1.backward(store, t1c, d);
    d = nn::relu_backward(expand_pre, reshaped(d, {c0 * len0}));
    return expand.backward(store, expand_cache, d);
  }
};

// Shared per-step spatial decoder: latent -> 8ch 3x4 map, two stride-2
// transposed convs to 12x16, crop to the 9x16 target, 3x3 conv to k maps.
struct PerStepWhereHead {
  nn::Dense proj;
  nn::TConv up1, up2;
  nn::Conv out_conv;
  size_t ch = 0, k = 0, m = 0, th = 9, tw = 16;

  std::vector<Cache> proj_c, up1_c, up2_c, out_c;
  std::vector<DenseTensor> proj_pre, pre1, pre2;
  DenseTensor scores;  // (k, m, th, tw)

  void create(ParamStore& store, const std::string& prefix, size_t latent_n, size_t cameras,
              size_t horizon, double scale, Rng& rng) {
    k = cameras;
    m = horizon;
    ch = scaled(scale, 8);
    proj = nn::Dense::create(store, prefix + ".proj", latent_n, ch * 3 * 4, rng);
    up1 = nn::TConv::create(store, prefix + ".up1", 2, ch, ch, 4, 2, 1, rng);
    up2 = nn::TConv::create(store, prefix + ".up2", 2, ch, ch, 4, 2, 1, rng);
    out_conv = nn::Conv::create(store, prefix + ".out", 2, ch, cameras, 3, rng);
  }

  DenseTensor forward(ParamStore& store, const std::vector<DenseTensor>& latents) {
    proj_c.assign(m, Cache());
    up1_c.assign(m, Cache());
    up2_c.assign(m, Cache());
    out_c.assign(m, Cache());
    proj_pre.assign(m, DenseTensor());
    pre1.assign(m, DenseTensor());
    pre2.assign(m, DenseTensor());
    DenseTensor pre({k, m, th, tw});
    for (size_t t = 0; t < m; ++t) {
      proj_pre[t] = proj.forward(store, latents[t], proj_c[t]);
      DenseTensor x = reshaped(nn::relu(proj_pre[t]), {ch, 3, 4});
      pre1[t] = up1.forward(store, x, up1_c[t]);
      pre2[t] = up2.forward(store, nn::relu(pre1[t]), up2_c[t]);
      DenseTensor cropped = crop_hw(nn::relu(pre2[t]), th, tw);
      DenseTensor maps = out_conv.forward(store, cropped, out_c[t]);  // (k, th, tw)
      for (size_t c = 0; c < k; ++c)
        for (size_t r = 0; r < th; ++r)
          for (size_t q = 0; q < tw; ++q) pre.at(c, t, r, q) = maps.at(c, r, q);
    }
    scores = nn::sigmoid(pre);
    return scores;
  }

  std::vector<DenseTensor> backward(ParamStore& store, const DenseTensor& d_scores) {
    DenseTensor d_pre = nn::sigmoid_backward(scores, d_scores);
    std::vector<DenseTensor> d_latents(m);
    for (size_t t = 0; t < m; ++t) {
      DenseTensor d_maps({k, th, tw});
      for (size_t c = 0; c < k; ++c)
        for (size_t r = 0; r < th; ++r)
          for (size_t q = 0; q < tw; ++q) d_maps.at(c, r, q) = d_pre.at(c, t, r, q);
      DenseTensor d = out_conv.backward(store, out_c[t], d_maps);
      d = pad_hw(d, 12, 16);  // undo the crop
      d = nn::relu_backward(pre2[t], d);
      d = up2.backward(store, up2_c[t], d);
      d = nn::relu_backward(pre1[t], d);
      d = up1.backward(store, up1_c[t], d);
      d = nn::relu_backward(proj_pre[t], reshaped(d, {ch * 3 * 4}));
      d_latents[t] = proj.backward(store, proj_c[t], d);
    }
    return d_latents;
  }
};

// 3D transposed-conv head: feature -> (6ch, m/4, 3, 4) volume, two stride-2
// upsamplings over time and space, crop, 3x3x3 conv to k channels.
struct Where3dHead {
  nn::Dense proj;
  nn::TConv up1, up2;
  nn::Conv out_conv;
  size_t c_in = 0, c_up = 0, k = 0, m = 0, th = 9, tw = 16;

  Cache proj_c, up1_c, up2_c, out_c;
  DenseTensor proj_pre, pre1, pre2, scores;

  void create(ParamStore& store, const std::string& prefix, size_t feature_n, size_t cameras,
              size_t horizon, double scale, Rng& rng) {
    k = cameras;
    m = horizon;
    c_in = scaled(scale, 6);
    c_up = scaled(scale, 8);
    proj = nn::Dense::create(store, prefix + ".proj", feature_n, c_in * (m / 4) * 3 * 4, rng);
    up1 = nn::TConv::create(store, prefix + ".up1", 3, c_in, c_up, 4, 2, 1, rng);
    up2 = nn::TConv::create(store, prefix + ".up2", 3, c_up, c_up, 4, 2, 1, rng);
    out_conv = nn::Conv::create(store, prefix + ".out", 3, c_up, cameras, 3, rng);
  }

  DenseTensor forward(ParamStore& store, const DenseTensor& feature) {
    proj_pre = proj.forward(store, feature, proj_c);
    DenseTensor x = reshaped(nn::relu(proj_pre), {c_in, m / 4, 3, 4});
    pre1 = up1.forward(store, x, up1_c);
    pre2 = up2.forward(store, nn::relu(pre1), up2_c);
    DenseTensor cropped = crop_hw(nn::relu(pre2), th, tw);  // (c_up, m, 9, 16)
    scores = nn::sigmoid(out_conv.forward(store, cropped, out_c));
    return scores;
  }

  DenseTensor backward(ParamStore& store, const DenseTensor& d_scores) {
    DenseTensor d = nn::sigmoid_backward(scores, d_scores);
    d = out_conv.backward(store, out_c, d);
    d = pad_hw(d, 12, 16);
    d = nn::relu_backward(pre2, d);
    d = up2.backward(store, up2_c, d);
    d = nn::relu_backward(pre1, d);
    d = up1.backward(store, up1_c, d);
    d = nn::relu_backward(proj_pre, reshaped(d, {c_in * (m / 4) * 3 * 4}));
    return proj.backward(store, proj_c, d);
  }
};

// (n,4) -> (4,n) and back for the 1D conv encoder.
DenseTensor track_to_channels(const DenseTensor& track) {
  size_t n = track.dim(0);
  DenseTensor out({4, n});
  for (size_t t = 0; t < n; ++t)
    for (size_t c = 0; c < 4; ++c) out.at(c, t) = track.at(t, c);
  return out;
}

DenseTensor channels_to_track(const DenseTensor& ch) {
  size_t n = ch.dim(1);
  DenseTensor out({n, 4});
  for (size_t t = 0; t < n; ++t)
    for (size_t c = 0; c < 4; ++c) out.at(t, c) = ch.at(c, t);
  return out;
}

DenseTensor slice_step(const DenseTensor& z, size_t t) {
  // (k, n, h, w) -> (k, h, w) at timestep t
  size_t k = z.dim(0), n = z.dim(1), cells = z.dim(2) * z.dim(3);
  DenseTensor out({k, z.dim(2), z.dim(3)});
  for (size_t c = 0; c < k; ++c)
    std::copy(z.data() + (c * n + t) * cells, z.data() + (c * n + t + 1) * cells,
              out.data() + c * cells);
  return out;
}

void add_step_grad(DenseTensor& dz, const DenseTensor& d_slice, size_t t) {
  size_t k = dz.dim(0), n = dz.dim(1), cells = dz.dim(2) * dz.dim(3);
  for (size_t c = 0; c < k; ++c) {
    double* dst = dz.data() + (c * n + t) * cells;
    const double* src = d_slice.data() + c * cells;
    for (size_t i = 0; i < cells; ++i) dst[i] += src[i];
  }
}

}  // namespace

// ===========================================================================
// Coordinate families
// ===========================================================================

namespace {

class GruLstmCoordModel : public MctfModel {
 public:
  GruLstmCoordModel(const ModelSpec& spec, Rng& rng) : MctfModel(spec) {
    bool use_lstm = spec.family == Family::lstm;
    hidden_ = spec.feature_size();
    if (use_lstm)
      enc_lstm_ = nn::LstmCell::create(params_, "enc.cell", 4, hidden_, rng);
    else
      enc_gru_ = nn::GruCell::create(params_, "enc.cell", 4, hidden_, rng);
    use_lstm_ = use_lstm;
    size_t dec_hidden = scaled(spec.channel_scale, 128);
    switch (spec.task) {
      case metrics::Task::which:
        which_.emplace();
        which_->create(params_, "head.which", hidden_, spec.cameras, rng);
        break;
      case metrics::Task::when:
        when_.emplace();
        when_->create(params_, "head.when", hidden_, dec_hidden, spec.cameras, spec.horizon,
                      use_lstm, rng);
        break;
      case metrics::Task::where:
        where_roll_.emplace();
        where_roll_->create(params_, "head.where.roll", hidden_, dec_hidden, spec.horizon,
                            use_lstm, rng);
        where_head_.emplace();
        where_head_->create(params_, "head.where", dec_hidden, spec.cameras, spec.horizon,
                            spec.channel_scale, rng);
        break;
    }
  }

  DenseTensor forward(const DenseTensor& input) override {
    input.require_shape({spec_.observed, 4}, "coordinate track");
    size_t n = spec_.observed;
    gsteps_.assign(use_lstm_ ? 0 : n, {});
    lsteps_.assign(use_lstm_ ? n : 0, {});
    DenseTensor h({hidden_}), c({hidden_});
    for (size_t t = 0; t < n; ++t) {
      DenseTensor x({4});
      for (size_t i = 0; i < 4; ++i) x[i] = input.at(t, i);
      if (use_lstm_) {
        DenseTensor hn, cn;
        enc_lstm_.forward(params_, x, h, c, hn, cn, lsteps_[t]);
        h = hn;
        c = std::move(cn);
      } else {
        h = enc_gru_.forward(params_, x, h, gsteps_[t]);
      }
    }
    feature_ = h;
    if (which_) return which_->forward(params_, feature_);
    if (when_) return when_->forward(params_, feature_);
    return where_head_->forward(params_, where_roll_->forward(params_, feature_));
  }

  DenseTensor backward(const DenseTensor& d_scores) override {
    DenseTensor d_feat;
    if (which_) {
      d_feat = which_->backward(params_, d_scores);
    } else if (when_) {
      d_feat = when_->backward(params_, d_scores);
    } else {
      auto d_latents = where_head_->backward(params_, d_scores);
      d_feat = where_roll_->backward(params_, d_latents);
    }
    size_t n = spec_.observed;
    DenseTensor d_track({n, 4});
    DenseTensor dh = d_feat, dc({hidden_});
    for (size_t t = n; t-- > 0;) {
      DenseTensor dx({4});
      if (use_lstm_) {
        DenseTensor dhp, dcp;
        enc_lstm_.backward(params_, lsteps_[t], dh, dc, dhp, dcp, &dx);
        dh = std::move(dhp);
        dc = std::move(dcp);
      } else {
        dh = enc_gru_.backward(params_, gsteps_[t], dh, &dx);
      }
      for (size_t i = 0; i < 4; ++i) d_track.at(t, i) = dx[i];
    }
    return d_track;
  }

 private:
  bool use_lstm_ = false;
  size_t hidden_ = 0;
  nn::GruCell enc_gru_;
  nn::LstmCell enc_lstm_;
  std::vector<nn::GruCell::Step> gsteps_;
  std::vector<nn::LstmCell::Step> lsteps_;
  DenseTensor feature_;
  std::optional<WhichHead> which_;
  std::optional<RecurrentWhenHead> when_;
  std::optional<RecurrentRollout> where_roll_;
  std::optional<PerStepWhereHead> where_head_;
};

class Cnn1dCoordModel : public MctfModel {
 public:
  Cnn1dCoordModel(const ModelSpec& spec, Rng& rng) : MctfModel(spec) {
    double s = spec.channel_scale;
    c1_ = nn::Conv::create(params_, "enc.c1", 1, 4, scaled(s, 32), 3, rng);
    c2_ = nn::Conv::create(params_, "enc.c2", 1, scaled(s, 32), scaled(s, 64), 3, rng);
    c3_ = nn::Conv::create(params_, "enc.c3", 1, scaled(s, 64), scaled(s, 128), 3, rng);
    pool_ = nn::MaxPool::create(1, 2);
    feature_n_ = scaled(s, 128);
    switch (spec.task) {
      case metrics::Task::which:
        which_.emplace();
        which_->create(params_, "head.which", feature_n_, spec.cameras, rng);
        break;
      case metrics::Task::when:
        when_.emplace();
        when_->create(params_, "head.when", feature_n_, spec.horizon, spec.cameras, s, true, rng);
        break;
      case metrics::Task::where:
        seq_.emplace();
        seq_->create(params_, "head.where.seq", feature_n_, spec.horizon, scaled(s, 16), s, false,
                     rng);
        where_.emplace();
        where_->create(params_, "head.where", scaled(s, 16), spec.cameras, spec.horizon, s, rng);
        break;
    }
  }

  DenseTensor forward(const DenseTensor& input) override {
    input.require_shape({spec_.observed, 4}, "coordinate track");
    DenseTensor x = track_to_channels(input);
    x = conv_pool_forward(c1_, pool_, params_, x, cc1_);
    x = conv_pool_forward(c2_, pool_, params_, x, cc2_);
    x = conv_pool_forward(c3_, pool_, params_, x, cc3_);
    pooled_shape_ = x.shape();
    feature_ = global_mean_pool(x);
    if (which_) return which_->forward(params_, feature_);
    if (when_) return when_->forward(params_, feature_);
    seq_out_ = seq_->forward(params_, feature_);  // (c, m)
    auto latents = split_columns(seq_out_);
    return where_->forward(params_, latents);
  }

  DenseTensor backward(const DenseTensor& d_scores) override {
    DenseTensor d_feat;
    if (which_) {
      d_feat = which_->backward(params_, d_scores);
    } else if (when_) {
      d_feat = when_->backward(params_, d_scores);
    } else {
      auto d_latents = where_->backward(params_, d_scores);
      DenseTensor d_seq(seq_out_.shape());
      size_t ch = seq_out_.dim(0), m = seq_out_.dim(1);
      for (size_t t = 0; t < m; ++t)
        for (size_t c = 0; c < ch; ++c) d_seq.at(c, t) = d_latents[t][c];
      d_feat = seq_->backward(params_, d_seq);
    }
    DenseTensor d = global_mean_pool_backward(pooled_shape_, d_feat);
    d = conv_pool_backward(c3_, pool_, params_, cc3_, d);
    d = conv_pool_backward(c2_, pool_, params_, cc2_, d);
    d = conv_pool_backward(c1_, pool_, params_, cc1_, d);
    return channels_to_track(d);
  }

 private:
  static std::vector<DenseTensor> split_columns(const DenseTensor& seq) {
    size_t ch = seq.dim(0), m = seq.dim(1);
    std::vector<DenseTensor> cols(m, DenseTensor({ch}));
    for (size_t t = 0; t < m; ++t)
      for (size_t c = 0; c < ch; ++c) cols[t][c] = seq.at(c, t);
    return cols;
  }

  nn::Conv c1_, c2_, c3_;
  nn::MaxPool pool_;
  ConvPoolCache cc1_, cc2_, cc3_;
  std::vector<size_t> pooled_shape_;
  size_t feature_n_ = 0;
  DenseTensor feature_, seq_out_;
  std::optional<WhichHead> which_;
  std::optional<ConvSeqDecoder> when_;
  std::optional<ConvSeqDecoder> seq_;
  std::optional<PerStepWhereHead> where_;
};

// ===========================================================================
// Tensor families
// ===========================================================================

class Cnn3dModel : public MctfModel {
 public:
  Cnn3dModel(const ModelSpec& spec, Rng& rng) : MctfModel(spec) {
    double s = spec.channel_scale;
    size_t k = spec.cameras;
    ch4_ = scaled(s, 256);
    c1_ = nn::Conv::create(params_, "enc.c1", 3, k, scaled(s, 32), 3, rng);
    c2_ = nn::Conv::create(params_, "enc.c2", 3, scaled(s, 32), scaled(s, 64), 3, rng);
    c3_ = nn::Conv::create(params_, "enc.c3", 3, scaled(s, 64), scaled(s, 128), 3, rng);
    c4_ = nn::Conv::create(params_, "enc.c4", 3, scaled(s, 128), ch4_, 3, rng);
    pool_ = nn::MaxPool::create(3, 2);
    to_feat_ = nn::Dense::create(params_, "enc.feat", ch4_, spec.feature_size(), rng);
    switch (spec.task) {
      case metrics::Task::which:
        which_.emplace();
        which_->create(params_, "head.which", spec.feature_size(), k, rng);
        break;
      case metrics::Task::when:
        when_.emplace();
        when_->create(params_, "head.when", spec.feature_size(), spec.horizon, k, s, true, rng);
        break;
      case metrics::Task::where:
        where_.emplace();
        where_->create(params_, "head.where", spec.feature_size(), k, spec.horizon, s, rng);
        break;
    }
  }

  DenseTensor forward(const DenseTensor& input) override {
    input.require_shape(spec_.input_shape(), "trajectory tensor");
    DenseTensor x = conv_pool_forward(c1_, pool_, params_, input, cc1_);
    x = conv_pool_forward(c2_, pool_, params_, x, cc2_);
    x = conv_pool_forward(c3_, pool_, params_, x, cc3_);
    x = conv_pool_forward(c4_, pool_, params_, x, cc4_);
    pooled_shape_ = x.shape();
    feat_pre_ = to_feat_.forward(params_, global_mean_pool(x), feat_cache_);
    feature_ = nn::relu(feat_pre_);
    if (which_) return which_->forward(params_, feature_);
    if (when_) return when_->forward(params_, feature_);
    return where_->forward(params_, feature_);
  }

  DenseTensor backward(const DenseTensor& d_scores) override {
    DenseTensor d_feat;
    if (which_) d_feat = which_->backward(params_, d_scores);
    else if (when_) d_feat = when_->backward(params_, d_scores);
    else d_feat = where_->backward(params_, d_scores);
    d_feat = nn::relu_backward(feat_pre_, d_feat);
    DenseTensor d = to_feat_.backward(params_, feat_cache_, d_feat);
    d = global_mean_pool_backward(pooled_shape_, d);
    d = conv_pool_backward(c4_, pool_, params_, cc4_, d);
    d = conv_pool_backward(c3_, pool_, params_, cc3_, d);
    d = conv_pool_backward(c2_, pool_, params_, cc2_, d);
    d = conv_pool_backward(c1_, pool_, params_, cc1_, d);
    return d;
  }

 private:
  nn::Conv c1_, c2_, c3_, c4_;
  nn::MaxPool pool_;
  nn::Dense to_feat_;
  ConvPoolCache cc1_, cc2_, cc3_, cc4_;
  Cache feat_cache_;
  std::vector<size_t> pooled_shape_;
  size_t ch4_ = 0;
  DenseTensor feat_pre_, feature_;
  std::optional<WhichHead> which_;
  std::optional<ConvSeqDecoder> when_;
  std::optional<Where3dHead> where_;
};

class Cnn2d1dModel : public MctfModel {
 public:
  Cnn2d1dModel(const ModelSpec& spec, Rng& rng) : MctfModel(spec) {
    double s = spec.channel_scale;
    size_t k = spec.cameras;
    ch2d_ = scaled(s, 128);
    ch1d_ = scaled(s, 256);
    s1_ = nn::Conv::create(params_, "enc.s1", 2, k, scaled(s, 32), 3, rng);
    s2_ = nn::Conv::create(params_, "enc.s2", 2, scaled(s, 32), scaled(s, 64), 3, rng);
    s3_ = nn::Conv::create(params_, "enc.s3", 2, scaled(s, 64), ch2d_, 3, rng);
    pool2_ = nn::MaxPool::create(2, 2);
    t1_ = nn::Conv::create(params_, "enc.t1", 1, ch2d_, scaled(s, 128), 3, rng);
    t2_ = nn::Conv::create(params_, "enc.t2", 1, scaled(s, 128), scaled(s, 192), 3, rng);
    t3_ = nn::Conv::create(params_, "enc.t3", 1, scaled(s, 192), ch1d_, 3, rng);
    pool1_ = nn::MaxPool::create(1, 2);
    to_feat_ = nn::Dense::create(params_, "enc.feat", ch1d_, spec.feature_size(), rng);
    switch (spec.task) {
      case metrics::Task::which:
        which_.emplace();
        which_->create(params_, "head.which", spec.feature_size(), k, rng);
        break;
      case metrics::Task::when:
        when_.emplace();
        when_->create(params_, "head.when", spec.feature_size(), spec.horizon, k, s, true, rng);
        break;
      case metrics::Task::where:
        seq_.emplace();
        seq_->create(params_, "head.where.seq", spec.feature_size(), spec.horizon, scaled(s, 16),
                     s, false, rng);
        where_.emplace();
        where_->create(params_, "head.where", scaled(s, 16), k, spec.horizon, s, rng);
        break;
    }
  }

  DenseTensor forward(const DenseTensor& input) override {
    input.require_shape(spec_.input_shape(), "trajectory tensor");
    size_t n = spec_.observed;
    sc1_.assign(n, {});
    sc2_.assign(n, {});
    sc3_.assign(n, {});
    step_shapes_.assign(n, {});
    DenseTensor seq({ch2d_, n});
    for (size_t t = 0; t < n; ++t) {
      DenseTensor x = slice_step(input, t);
      x = conv_pool_forward(s1_, pool2_, params_, x, sc1_[t]);
      x = conv_pool_forward(s2_, pool2_, params_, x, sc2_[t]);
      x = conv_pool_forward(s3_, pool2_, params_, x, sc3_[t]);
      step_shapes_[t] = x.shape();
      DenseTensor v = global_mean_pool(x);
      for (size_t c = 0; c < ch2d_; ++c) seq.at(c, t) = v[c];
    }
    DenseTensor x = conv_pool_forward(t1_, pool1_, params_, seq, tc1_);
    x = conv_pool_forward(t2_, pool1_, params_, x, tc2_);
    x = conv_pool_forward(t3_, pool1_, params_, x, tc3_);
    pooled_shape_ = x.shape();
    feat_pre_ = to_feat_.forward(params_, global_mean_pool(x), feat_cache_);
    feature_ = nn::relu(feat_pre_);
    if (which_) return which_->forward(params_, feature_);
    if (when_) return when_->forward(params_, feature_);
    seq_out_ = seq_->forward(params_, feature_);
    std::vector<DenseTensor> latents(spec_.horizon, DenseTensor({seq_out_.dim(0)}));
    for (size_t t = 0; t < spec_.horizon; ++t)
      for (size_t c = 0; c < seq_out_.dim(0); ++c) latents[t][c] = seq_out_.at(c, t);
    return where_->forward(params_, latents);
  }

  DenseTensor backward(const DenseTensor& d_scores) override {
    DenseTensor d_feat;
    if (which_) {
      d_feat = which_->backward(params_, d_scores);
    } else if (when_) {
      d_feat = when_->backward(params_, d_scores);
    } else {
      auto d_latents = where_->backward(params_, d_scores);
      DenseTensor d_seq(seq_out_.shape());
      for (size_t t = 0; t < spec_.horizon; ++t)
        for (size_t c = 0; c < seq_out_.dim(0); ++c) d_seq.at(c, t) = d_latents[t][c];
      d_feat = seq_->backward(params_, d_seq);
    }
    d_feat = nn::relu_backward(feat_pre_, d_feat);
    DenseTensor d = to_feat_.backward(params_, feat_cache_, d_feat);
    d = global_mean_pool_backward(pooled_shape_, d);
    d = conv_pool_backward(t3_, pool1_, params_, tc3_, d);
    d = conv_pool_backward(t2_, pool1_, params_, tc2_, d);
    d = conv_pool_backward(t1_, pool1_, params_, tc1_, d);
    // d is (ch2d, n): fan each column back through the shared 2D stage
    size_t n = spec_.observed;
    DenseTensor dz(spec_.input_shape());
    for (size_t t = 0; t < n; ++t) {
      DenseTensor dv({ch2d_});
      for (size_t c = 0; c < ch2d_; ++c) dv[c] = d.at(c, t);
      DenseTensor ds = global_mean_pool_backward(step_shapes_[t], dv);
      ds = conv_pool_backward(s3_, pool2_, params_, sc3_[t], ds);
      ds = conv_pool_backward(s2_, pool2_, params_, sc2_[t], ds);
      ds = conv_pool_backward(s1_, pool2_, params_, sc1_[t], ds);
      add_step_grad(dz, ds, t);
    }
    return dz;
  }

 private:
  nn::Conv s1_, s2_, s3_, t1_, t2_, t3_;
  nn::MaxPool pool2_, pool1_;
  nn::Dense to_feat_;
  std::vector<ConvPoolCache> sc1_, sc2_, sc3_;
  std::vector<std::vector<size_t>> step_shapes_;
  ConvPoolCache tc1_, tc2_, tc3_;
  Cache feat_cache_;
  std::vector<size_t> pooled_shape_;
  size_t ch2d_ = 0, ch1d_ = 0;
  DenseTensor feat_pre_, feature_, seq_out_;
  std::optional<WhichHead> which_;
  std::optional<ConvSeqDecoder> when_;
  std::optional<ConvSeqDecoder> seq_;
  std::optional<PerStepWhereHead> where_;
};

class CnnGruModel : public MctfModel {
 public:
  CnnGruModel(const ModelSpec& spec, Rng& rng) : MctfModel(spec) {
    double s = spec.channel_scale;
    size_t k = spec.cameras;
    a8_ = scaled(s, 8);
    a16_ = scaled(s, 16);
    latent_n_ = scaled(s, 128);
    hidden_ = spec.feature_size();
    h2_ = (spec.grid_h / 2) / 2;
    w2_ = (spec.grid_w / 2) / 2;
    ae_c1_ = nn::Conv::create(params_, "ae.enc.c1", 2, k, a8_, 3, rng);
    ae_c2_ = nn::Conv::create(params_, "ae.enc.c2", 2, a8_, a16_, 3, rng);
    ae_pool_ = nn::MaxPool::create(2, 2);
    ae_to_lat_ = nn::Dense::create(params_, "ae.enc.lat", a16_ * h2_ * w2_, latent_n_, rng);
    ae_from_lat_ = nn::Dense::create(params_, "ae.dec.lat", latent_n_, a16_ * h2_ * w2_, rng);
    ae_u1_ = nn::TConv::create(params_, "ae.dec.u1", 2, a16_, a8_, 4, 2, 1, rng);
    ae_u2_ = nn::TConv::create(params_, "ae.dec.u2", 2, a8_, a8_, 4, 2, 1, rng);
    ae_out_ = nn::Conv::create(params_, "ae.dec.out", 2, a8_, k, 3, rng);
    seq_gru_ = nn::GruCell::create(params_, "enc.cell", latent_n_, hidden_, rng);
    size_t dec_hidden = scaled(s, 128);
    switch (spec.task) {
      case metrics::Task::which:
        which_.emplace();
        which_->create(params_, "head.which", hidden_, k, rng);
        break;
      case metrics::Task::when:
        when_.emplace();
        when_->create(params_, "head.when", hidden_, dec_hidden, k, spec.horizon, false, rng);
        break;
      case metrics::Task::where:
        where_roll_.emplace();
        where_roll_->create(params_, "head.where.roll", hidden_, dec_hidden, spec.horizon, false,
                            rng);
        where_head_.emplace();
        where_head_->create(params_, "head.where", dec_hidden, k, spec.horizon, s, rng);
        break;
    }
  }

  bool has_autoencoder() const override { return true; }

  DenseTensor forward(const DenseTensor& input) override {
    input.require_shape(spec_.input_shape(), "trajectory tensor");
    size_t n = spec_.observed;
    ec1_.assign(n, {});
    ec2_.assign(n, {});
    lat_c_.assign(n, Cache());
    lat_pre_.assign(n, DenseTensor());
    gsteps_.assign(n, {});
    DenseTensor h({hidden_});
    for (size_t t = 0; t < n; ++t) {
      DenseTensor lat = encode_slice(slice_step(input, t), ec1_[t], ec2_[t], lat_c_[t], lat_pre_[t]);
      h = seq_gru_.forward(params_, lat, h, gsteps_[t]);
    }
    feature_ = h;
    if (which_) return which_->forward(params_, feature_);
    if (when_) return when_->forward(params_, feature_);
    return where_head_->forward(params_, where_roll_->forward(params_, feature_));
  }

  DenseTensor backward(const DenseTensor& d_scores) override {
    DenseTensor d_feat;
    if (which_) {
      d_feat = which_->backward(params_, d_scores);
    } else if (when_) {
      d_feat = when_->backward(params_, d_scores);
    } else {
      auto d_latents = where_head_->backward(params_, d_scores);
      d_feat = where_roll_->backward(params_, d_latents);
    }
    size_t n = spec_.observed;
    DenseTensor dz(spec_.input_shape());
    DenseTensor dh = d_feat;
    for (size_t t = n; t-- > 0;) {
      DenseTensor d_lat({latent_n_});
      dh = seq_gru_.backward(params_, gsteps_[t], dh, &d_lat);
      DenseTensor ds = encode_slice_backward(d_lat, ec1_[t], ec2_[t], lat_c_[t], lat_pre_[t]);
      add_step_grad(dz, ds, t);
    }
    return dz;
  }

  DenseTensor autoencode_forward(const DenseTensor& slice) override {
    slice.require_shape({spec_.cameras, spec_.grid_h, spec_.grid_w}, "timestep slice");
    DenseTensor lat = encode_slice(slice, ae_fc1_, ae_fc2_, ae_flat_c_, ae_flat_pre_);
    dec_pre_ = ae_from_lat_.forward(params_, lat, ae_dec_c_);
    DenseTensor x = reshaped(nn::relu(dec_pre_), {a16_, h2_, w2_});
    dec_pre1_ = ae_u1_.forward(params_, x, ae_u1_c_);
    dec_pre2_ = ae_u2_.forward(params_, nn::relu(dec_pre1_), ae_u2_c_);
    padded_from_ = dec_pre2_.shape();
    DenseTensor up = pad_hw(nn::relu(dec_pre2_), spec_.grid_h, spec_.grid_w);
    recon_ = nn::sigmoid(ae_out_.forward(params_, up, ae_out_c_));
    return recon_;
  }

  void autoencode_backward(const DenseTensor& d_recon) override {
    DenseTensor d = nn::sigmoid_backward(recon_, d_recon);
    d = ae_out_.backward(params_, ae_out_c_, d);
    d = crop_hw(d, padded_from_[1], padded_from_[2]);
    d = nn::relu_backward(dec_pre2_, d);
    d = ae_u2_.backward(params_, ae_u2_c_, d);
    d = nn::relu_backward(dec_pre1_, d);
    d = ae_u1_.backward(params_, ae_u1_c_, d);
    d = nn::relu_backward(dec_pre_, reshaped(d, {a16_ * h2_ * w2_}));
    d = ae_from_lat_.backward(params_, ae_dec_c_, d);
    encode_slice_backward(d, ae_fc1_, ae_fc2_, ae_flat_c_, ae_flat_pre_);
  }

 private:
  DenseTensor encode_slice(const DenseTensor& slice, ConvPoolCache& c1, ConvPoolCache& c2,
                           Cache& lat_c, DenseTensor& lat_pre) {
    DenseTensor x = conv_pool_forward(ae_c1_, ae_pool_, params_, slice, c1);
    x = conv_pool_forward(ae_c2_, ae_pool_, params_, x, c2);
    lat_pre = ae_to_lat_.forward(params_, reshaped(x, {a16_ * h2_ * w2_}), lat_c);
    return nn::relu(lat_pre);
  }

  DenseTensor encode_slice_backward(const DenseTensor& d_lat, const ConvPoolCache& c1,
                                    const ConvPoolCache& c2, const Cache& lat_c,
                                    const DenseTensor& lat_pre) {
    DenseTensor d = nn::relu_backward(lat_pre, d_lat);
    d = ae_to_lat_.backward(params_, lat_c, d);
    d = reshaped(d, {a16_, h2_, w2_});
    d = conv_pool_backward(ae_c2_, ae_pool_, params_, c2, d);
    return conv_pool_backward(ae_c1_, ae_pool_, params_, c1, d);
  }

  size_t a8_ = 0, a16_ = 0, latent_n_ = 0, hidden_ = 0, h2_ = 0, w2_ = 0;
  nn::Conv ae_c1_, ae_c2_, ae_out_;
  nn::MaxPool ae_pool_;
  nn::Dense ae_to_lat_, ae_from_lat_;
  nn::TConv ae_u1_, ae_u2_;
  nn::GruCell seq_gru_;
  // sequence-path caches
  std::vector<ConvPoolCache> ec1_, ec2_;
  std::vector<Cache> lat_c_;
  std::vector<DenseTensor> lat_pre_;
  std::vector<nn::GruCell::Step> gsteps_;
  DenseTensor feature_;
  // autoencoder-path caches
  ConvPoolCache ae_fc1_, ae_fc2_;
  Cache ae_flat_c_, ae_dec_c_, ae_u1_c_, ae_u2_c_, ae_out_c_;
  DenseTensor ae_flat_pre_, dec_pre_, dec_pre1_, dec_pre2_, recon_;
  std::vector<size_t> padded_from_;
  std::optional<WhichHead> which_;
  std::optional<RecurrentWhenHead> when_;
  std::optional<RecurrentRollout> where_roll_;
  std::optional<PerStepWhereHead> where_head_;
};

}  // namespace

std::unique_ptr<MctfModel> MctfModel::build(const ModelSpec& spec, uint64_t init_seed) {
  spec.validate();
  Rng rng = Rng::derive(init_seed, 0x6d6f64656cull);
  switch (spec.family) {
    case Family::gru:
    case Family::lstm:
      return std::make_unique<GruLstmCoordModel>(spec, rng);
    case Family::cnn1d:
      return std::make_unique<Cnn1dCoordModel>(spec, rng);
    case Family::cnn3d:
      return std::make_unique<Cnn3dModel>(spec, rng);
    case Family::cnn2d1d:
      return std::make_unique<Cnn2d1dModel>(spec, rng);
    case Family::cnn_gru:
      return std::make_unique<CnnGruModel>(spec, rng);
  }
  throw InvalidInputError("unknown family");
}

}  // namespace trajtensor::models
