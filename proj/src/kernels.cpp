#include "trajtensor/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace trajtensor::kernels {

namespace {
std::atomic<int> g_max_threads{0};

using idx = std::ptrdiff_t;
}  // namespace

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int effective_threads() {
#ifdef _OPENMP
  int hw = omp_get_max_threads();
#else
  int hw = 1;
#endif
  int cap = g_max_threads.load();
  return cap > 0 ? std::min(cap, hw) : hw;
}

// ---------------------------------------------------------------------------
// Serial reference. Written in plain per-output gather form; the parallel
// kernels below must accumulate contributions in the same (ic,kd,kh,kw)
// order so both paths agree bitwise.
// ---------------------------------------------------------------------------

namespace reference {

void conv3d_forward(const double* in, const double* weight, const double* bias, double* out,
                    const ConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
    for (idx od = 0; od < out_d; ++od) {
      for (idx oh = 0; oh < out_h; ++oh) {
        for (idx ow = 0; ow < out_w; ++ow) {
          double acc = bias ? bias[oc] : 0.0;
          for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
            for (idx kd = 0; kd < idx(d.k_d); ++kd) {
              idx id = od + kd - idx(d.p_d);
              if (id < 0 || id >= idx(d.in_d)) continue;
              for (idx kh = 0; kh < idx(d.k_h); ++kh) {
                idx ih = oh + kh - idx(d.p_h);
                if (ih < 0 || ih >= idx(d.in_h)) continue;
                for (idx kw = 0; kw < idx(d.k_w); ++kw) {
                  idx iw = ow + kw - idx(d.p_w);
                  if (iw < 0 || iw >= idx(d.in_w)) continue;
                  double wv = weight[(((oc * idx(d.in_ch) + ic) * idx(d.k_d) + kd) * idx(d.k_h) + kh) *
                                         idx(d.k_w) + kw];
                  acc += wv * in[((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw];
                }
              }
            }
          }
          out[((oc * out_d + od) * out_h + oh) * out_w + ow] = acc;
        }
      }
    }
  }
}

void conv3d_backward_input(const double* weight, const double* d_out, double* d_in,
                           const ConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
    for (idx id = 0; id < idx(d.in_d); ++id) {
      for (idx ih = 0; ih < idx(d.in_h); ++ih) {
        for (idx iw = 0; iw < idx(d.in_w); ++iw) {
          double acc = 0.0;
          for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
            for (idx kd = 0; kd < idx(d.k_d); ++kd) {
              idx od = id - kd + idx(d.p_d);
              if (od < 0 || od >= out_d) continue;
              for (idx kh = 0; kh < idx(d.k_h); ++kh) {
                idx oh = ih - kh + idx(d.p_h);
                if (oh < 0 || oh >= out_h) continue;
                for (idx kw = 0; kw < idx(d.k_w); ++kw) {
                  idx ow = iw - kw + idx(d.p_w);
                  if (ow < 0 || ow >= out_w) continue;
                  double wv = weight[(((oc * idx(d.in_ch) + ic) * idx(d.k_d) + kd) * idx(d.k_h) + kh) *
                                         idx(d.k_w) + kw];
                  acc += wv * d_out[((oc * out_d + od) * out_h + oh) * out_w + ow];
                }
              }
            }
          }
          d_in[((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw] = acc;
        }
      }
    }
  }
}

void conv3d_backward_params(const double* in, const double* d_out, double* d_weight,
                            double* d_bias, const ConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
    const double* dout_c = d_out + oc * out_d * out_h * out_w;
    if (d_bias) {
      double acc = 0.0;
      for (idx i = 0; i < out_d * out_h * out_w; ++i) acc += dout_c[i];
      d_bias[oc] += acc;
    }
    for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
      for (idx kd = 0; kd < idx(d.k_d); ++kd) {
        for (idx kh = 0; kh < idx(d.k_h); ++kh) {
          for (idx kw = 0; kw < idx(d.k_w); ++kw) {
            double acc = 0.0;
            for (idx od = 0; od < out_d; ++od) {
              idx id = od + kd - idx(d.p_d);
              if (id < 0 || id >= idx(d.in_d)) continue;
              for (idx oh = 0; oh < out_h; ++oh) {
                idx ih = oh + kh - idx(d.p_h);
                if (ih < 0 || ih >= idx(d.in_h)) continue;
                for (idx ow = 0; ow < out_w; ++ow) {
                  idx iw = ow + kw - idx(d.p_w);
                  if (iw < 0 || iw >= idx(d.in_w)) continue;
                  acc += in[((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw] *
                         dout_c[(od * out_h + oh) * out_w + ow];
                }
              }
            }
            d_weight[(((oc * idx(d.in_ch) + ic) * idx(d.k_d) + kd) * idx(d.k_h) + kh) * idx(d.k_w) +
                     kw] += acc;
          }
        }
      }
    }
  }
}

void tconv3d_forward(const double* in, const double* weight, const double* bias, double* out,
                     const TConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
    for (idx od = 0; od < out_d; ++od) {
      for (idx oh = 0; oh < out_h; ++oh) {
        for (idx ow = 0; ow < out_w; ++ow) {
          double acc = bias ? bias[oc] : 0.0;
          for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
            for (idx kd = 0; kd < idx(d.k_d); ++kd) {
              idx td = od - kd + idx(d.p_d);
              if (td < 0 || td % idx(d.s_d)) continue;
              idx id = td / idx(d.s_d);
              if (id >= idx(d.in_d)) continue;
              for (idx kh = 0; kh < idx(d.k_h); ++kh) {
                idx th = oh - kh + idx(d.p_h);
                if (th < 0 || th % idx(d.s_h)) continue;
                idx ih = th / idx(d.s_h);
                if (ih >= idx(d.in_h)) continue;
                for (idx kw = 0; kw < idx(d.k_w); ++kw) {
                  idx tw = ow - kw + idx(d.p_w);
                  if (tw < 0 || tw % idx(d.s_w)) continue;
                  idx iw = tw / idx(d.s_w);
                  if (iw >= idx(d.in_w)) continue;
                  double wv = weight[(((ic * idx(d.out_ch) + oc) * idx(d.k_d) + kd) * idx(d.k_h) + kh) *
                                         idx(d.k_w) + kw];
                  acc += wv * in[((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw];
                }
              }
            }
          }
          out[((oc * out_d + od) * out_h + oh) * out_w + ow] = acc;
        }
      }
    }
  }
}

void tconv3d_backward_input(const double* weight, const double* d_out, double* d_in,
                            const TConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
    for (idx id = 0; id < idx(d.in_d); ++id) {
      for (idx ih = 0; ih < idx(d.in_h); ++ih) {
        for (idx iw = 0; iw < idx(d.in_w); ++iw) {
          double acc = 0.0;
          for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
            for (idx kd = 0; kd < idx(d.k_d); ++kd) {
              idx od = id * idx(d.s_d) + kd - idx(d.p_d);
              if (od < 0 || od >= out_d) continue;
              for (idx kh = 0; kh < idx(d.k_h); ++kh) {
                idx oh = ih * idx(d.s_h) + kh - idx(d.p_h);
                if (oh < 0 || oh >= out_h) continue;
                for (idx kw = 0; kw < idx(d.k_w); ++kw) {
                  idx ow = iw * idx(d.s_w) + kw - idx(d.p_w);
                  if (ow < 0 || ow >= out_w) continue;
                  double wv = weight[(((ic * idx(d.out_ch) + oc) * idx(d.k_d) + kd) * idx(d.k_h) + kh) *
                                         idx(d.k_w) + kw];
                  acc += wv * d_out[((oc * out_d + od) * out_h + oh) * out_w + ow];
                }
              }
            }
          }
          d_in[((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw] = acc;
        }
      }
    }
  }
}

void tconv3d_backward_params(const double* in, const double* d_out, double* d_weight,
                             double* d_bias, const TConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  if (d_bias) {
    for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
      const double* dout_c = d_out + oc * out_d * out_h * out_w;
      double acc = 0.0;
      for (idx i = 0; i < out_d * out_h * out_w; ++i) acc += dout_c[i];
      d_bias[oc] += acc;
    }
  }
  for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
    for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
      for (idx kd = 0; kd < idx(d.k_d); ++kd) {
        for (idx kh = 0; kh < idx(d.k_h); ++kh) {
          for (idx kw = 0; kw < idx(d.k_w); ++kw) {
            double acc = 0.0;
            for (idx id = 0; id < idx(d.in_d); ++id) {
              idx od = id * idx(d.s_d) + kd - idx(d.p_d);
              if (od < 0 || od >= out_d) continue;
              for (idx ih = 0; ih < idx(d.in_h); ++ih) {
                idx oh = ih * idx(d.s_h) + kh - idx(d.p_h);
                if (oh < 0 || oh >= out_h) continue;
                for (idx iw = 0; iw < idx(d.in_w); ++iw) {
                  idx ow = iw * idx(d.s_w) + kw - idx(d.p_w);
                  if (ow < 0 || ow >= out_w) continue;
                  acc += in[((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw] *
                         d_out[((oc * out_d + od) * out_h + oh) * out_w + ow];
                }
              }
            }
            d_weight[(((ic * idx(d.out_ch) + oc) * idx(d.k_d) + kd) * idx(d.k_h) + kh) * idx(d.k_w) +
                     kw] += acc;
          }
        }
      }
    }
  }
}

void maxpool3d_forward(const double* in, double* out, size_t* argmax, const PoolDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  for (idx c = 0; c < idx(d.ch); ++c) {
    for (idx od = 0; od < out_d; ++od) {
      for (idx oh = 0; oh < out_h; ++oh) {
        for (idx ow = 0; ow < out_w; ++ow) {
          double best = -std::numeric_limits<double>::infinity();
          size_t best_idx = 0;
          for (idx kd = 0; kd < idx(d.k_d); ++kd) {
            for (idx kh = 0; kh < idx(d.k_h); ++kh) {
              for (idx kw = 0; kw < idx(d.k_w); ++kw) {
                idx id = od * idx(d.k_d) + kd;
                idx ih = oh * idx(d.k_h) + kh;
                idx iw = ow * idx(d.k_w) + kw;
                size_t at = size_t(((c * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw);
                if (in[at] > best) {  // ties keep the first window position
                  best = in[at];
                  best_idx = at;
                }
              }
            }
          }
          size_t o = size_t(((c * out_d + od) * out_h + oh) * out_w + ow);
          out[o] = best;
          argmax[o] = best_idx;
        }
      }
    }
  }
}

void maxpool3d_backward(const size_t* argmax, const double* d_out, double* d_in,
                        const PoolDims& d) {
  size_t n = d.out_size();
  for (size_t o = 0; o < n; ++o) d_in[argmax[o]] += d_out[o];
}

void dense_forward(const double* weight, const double* bias, const double* x, double* y,
                   size_t out_n, size_t in_n) {
  for (size_t o = 0; o < out_n; ++o) {
    double acc = bias ? bias[o] : 0.0;
    const double* row = weight + o * in_n;
    for (size_t i = 0; i < in_n; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void dense_backward_input(const double* weight, const double* dy, double* dx, size_t out_n,
                          size_t in_n) {
  for (size_t i = 0; i < in_n; ++i) {
    double acc = 0.0;
    for (size_t o = 0; o < out_n; ++o) acc += weight[o * in_n + i] * dy[o];
    dx[i] = acc;
  }
}

void dense_backward_params(const double* x, const double* dy, double* d_weight, double* d_bias,
                           size_t out_n, size_t in_n) {
  for (size_t o = 0; o < out_n; ++o) {
    if (d_bias) d_bias[o] += dy[o];
    double g = dy[o];
    double* row = d_weight + o * in_n;
    for (size_t i = 0; i < in_n; ++i) row[i] += g * x[i];
  }
}

}  // namespace reference

// ---------------------------------------------------------------------------
// OpenMP kernels. Work is split by output (or input-gradient) channel, and
// within a channel the accumulation walks (ic,kd,kh,kw) exactly like the
// reference, so every element sees the same addition order.
// ---------------------------------------------------------------------------

void conv3d_forward(const double* in, const double* weight, const double* bias, double* out,
                    const ConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  idx in_d = idx(d.in_d), in_h = idx(d.in_h), in_w = idx(d.in_w);
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
    double* out_c = out + oc * out_d * out_h * out_w;
    double b = bias ? bias[oc] : 0.0;
    for (idx i = 0; i < out_d * out_h * out_w; ++i) out_c[i] = b;
    for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
      for (idx kd = 0; kd < idx(d.k_d); ++kd) {
        idx od_lo = std::max<idx>(0, idx(d.p_d) - kd);
        idx od_hi = std::min<idx>(out_d, in_d + idx(d.p_d) - kd);
        for (idx kh = 0; kh < idx(d.k_h); ++kh) {
          idx oh_lo = std::max<idx>(0, idx(d.p_h) - kh);
          idx oh_hi = std::min<idx>(out_h, in_h + idx(d.p_h) - kh);
          for (idx kw = 0; kw < idx(d.k_w); ++kw) {
            idx ow_lo = std::max<idx>(0, idx(d.p_w) - kw);
            idx ow_hi = std::min<idx>(out_w, in_w + idx(d.p_w) - kw);
            if (od_lo >= od_hi || oh_lo >= oh_hi || ow_lo >= ow_hi) continue;
            double wv = weight[(((oc * idx(d.in_ch) + ic) * idx(d.k_d) + kd) * idx(d.k_h) + kh) *
                                   idx(d.k_w) + kw];
            idx shift = kw - idx(d.p_w);
            for (idx od = od_lo; od < od_hi; ++od) {
              idx id = od + kd - idx(d.p_d);
              for (idx oh = oh_lo; oh < oh_hi; ++oh) {
                idx ih = oh + kh - idx(d.p_h);
                const double* in_row = in + ((ic * in_d + id) * in_h + ih) * in_w;
                double* out_row = out_c + (od * out_h + oh) * out_w;
                for (idx ow = ow_lo; ow < ow_hi; ++ow) out_row[ow] += wv * in_row[ow + shift];
              }
            }
          }
        }
      }
    }
  }
}

void conv3d_backward_input(const double* weight, const double* d_out, double* d_in,
                           const ConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  idx in_d = idx(d.in_d), in_h = idx(d.in_h), in_w = idx(d.in_w);
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
    double* din_c = d_in + ic * in_d * in_h * in_w;
    for (idx i = 0; i < in_d * in_h * in_w; ++i) din_c[i] = 0.0;
    for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
      for (idx kd = 0; kd < idx(d.k_d); ++kd) {
        idx id_lo = std::max<idx>(0, kd - idx(d.p_d));
        idx id_hi = std::min<idx>(in_d, out_d + kd - idx(d.p_d));
        for (idx kh = 0; kh < idx(d.k_h); ++kh) {
          idx ih_lo = std::max<idx>(0, kh - idx(d.p_h));
          idx ih_hi = std::min<idx>(in_h, out_h + kh - idx(d.p_h));
          for (idx kw = 0; kw < idx(d.k_w); ++kw) {
            idx iw_lo = std::max<idx>(0, kw - idx(d.p_w));
            idx iw_hi = std::min<idx>(in_w, out_w + kw - idx(d.p_w));
            if (id_lo >= id_hi || ih_lo >= ih_hi || iw_lo >= iw_hi) continue;
            double wv = weight[(((oc * idx(d.in_ch) + ic) * idx(d.k_d) + kd) * idx(d.k_h) + kh) *
                                   idx(d.k_w) + kw];
            idx shift = idx(d.p_w) - kw;
            for (idx id = id_lo; id < id_hi; ++id) {
              idx od = id - kd + idx(d.p_d);
              for (idx ih = ih_lo; ih < ih_hi; ++ih) {
                idx oh = ih - kh + idx(d.p_h);
                const double* dout_row = d_out + ((oc * out_d + od) * out_h + oh) * out_w;
                double* din_row = din_c + (id * in_h + ih) * in_w;
                for (idx iw = iw_lo; iw < iw_hi; ++iw) din_row[iw] += wv * dout_row[iw + shift];
              }
            }
          }
        }
      }
    }
  }
}

void conv3d_backward_params(const double* in, const double* d_out, double* d_weight,
                            double* d_bias, const ConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
    const double* dout_c = d_out + oc * out_d * out_h * out_w;
    if (d_bias) {
      double acc = 0.0;
      for (idx i = 0; i < out_d * out_h * out_w; ++i) acc += dout_c[i];
      d_bias[oc] += acc;
    }
    for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
      for (idx kd = 0; kd < idx(d.k_d); ++kd) {
        for (idx kh = 0; kh < idx(d.k_h); ++kh) {
          for (idx kw = 0; kw < idx(d.k_w); ++kw) {
            double acc = 0.0;
            for (idx od = 0; od < out_d; ++od) {
              idx id = od + kd - idx(d.p_d);
              if (id < 0 || id >= idx(d.in_d)) continue;
              for (idx oh = 0; oh < out_h; ++oh) {
                idx ih = oh + kh - idx(d.p_h);
                if (ih < 0 || ih >= idx(d.in_h)) continue;
                const double* in_row = in + ((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w);
                const double* dout_row = dout_c + (od * out_h + oh) * out_w;
                idx shift = kw - idx(d.p_w);
                idx ow_lo = std::max<idx>(0, idx(d.p_w) - kw);
                idx ow_hi = std::min<idx>(out_w, idx(d.in_w) + idx(d.p_w) - kw);
                for (idx ow = ow_lo; ow < ow_hi; ++ow) acc += in_row[ow + shift] * dout_row[ow];
              }
            }
            d_weight[(((oc * idx(d.in_ch) + ic) * idx(d.k_d) + kd) * idx(d.k_h) + kh) * idx(d.k_w) +
                     kw] += acc;
          }
        }
      }
    }
  }
}

void tconv3d_forward(const double* in, const double* weight, const double* bias, double* out,
                     const TConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
    double* out_c = out + oc * out_d * out_h * out_w;
    double b = bias ? bias[oc] : 0.0;
    for (idx i = 0; i < out_d * out_h * out_w; ++i) out_c[i] = b;
    for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
      for (idx kd = 0; kd < idx(d.k_d); ++kd) {
        for (idx kh = 0; kh < idx(d.k_h); ++kh) {
          for (idx kw = 0; kw < idx(d.k_w); ++kw) {
            double wv = weight[(((ic * idx(d.out_ch) + oc) * idx(d.k_d) + kd) * idx(d.k_h) + kh) *
                                   idx(d.k_w) + kw];
            for (idx id = 0; id < idx(d.in_d); ++id) {
              idx od = id * idx(d.s_d) + kd - idx(d.p_d);
              if (od < 0 || od >= out_d) continue;
              for (idx ih = 0; ih < idx(d.in_h); ++ih) {
                idx oh = ih * idx(d.s_h) + kh - idx(d.p_h);
                if (oh < 0 || oh >= out_h) continue;
                const double* in_row = in + ((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w);
                double* out_row = out_c + (od * out_h + oh) * out_w;
                for (idx iw = 0; iw < idx(d.in_w); ++iw) {
                  idx ow = iw * idx(d.s_w) + kw - idx(d.p_w);
                  if (ow < 0 || ow >= out_w) continue;
                  out_row[ow] += wv * in_row[iw];
                }
              }
            }
          }
        }
      }
    }
  }
}

void tconv3d_backward_input(const double* weight, const double* d_out, double* d_in,
                            const TConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
    for (idx id = 0; id < idx(d.in_d); ++id) {
      for (idx ih = 0; ih < idx(d.in_h); ++ih) {
        for (idx iw = 0; iw < idx(d.in_w); ++iw) {
          double acc = 0.0;
          for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
            for (idx kd = 0; kd < idx(d.k_d); ++kd) {
              idx od = id * idx(d.s_d) + kd - idx(d.p_d);
              if (od < 0 || od >= out_d) continue;
              for (idx kh = 0; kh < idx(d.k_h); ++kh) {
                idx oh = ih * idx(d.s_h) + kh - idx(d.p_h);
                if (oh < 0 || oh >= out_h) continue;
                for (idx kw = 0; kw < idx(d.k_w); ++kw) {
                  idx ow = iw * idx(d.s_w) + kw - idx(d.p_w);
                  if (ow < 0 || ow >= out_w) continue;
                  double wv = weight[(((ic * idx(d.out_ch) + oc) * idx(d.k_d) + kd) * idx(d.k_h) + kh) *
                                         idx(d.k_w) + kw];
                  acc += wv * d_out[((oc * out_d + od) * out_h + oh) * out_w + ow];
                }
              }
            }
          }
          d_in[((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw] = acc;
        }
      }
    }
  }
}

void tconv3d_backward_params(const double* in, const double* d_out, double* d_weight,
                             double* d_bias, const TConvDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  int threads = effective_threads();
  if (d_bias) {
#pragma omp parallel for num_threads(threads) schedule(static)
    for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
      const double* dout_c = d_out + oc * out_d * out_h * out_w;
      double acc = 0.0;
      for (idx i = 0; i < out_d * out_h * out_w; ++i) acc += dout_c[i];
      d_bias[oc] += acc;
    }
  }
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx ic = 0; ic < idx(d.in_ch); ++ic) {
    for (idx oc = 0; oc < idx(d.out_ch); ++oc) {
      for (idx kd = 0; kd < idx(d.k_d); ++kd) {
        for (idx kh = 0; kh < idx(d.k_h); ++kh) {
          for (idx kw = 0; kw < idx(d.k_w); ++kw) {
            double acc = 0.0;
            for (idx id = 0; id < idx(d.in_d); ++id) {
              idx od = id * idx(d.s_d) + kd - idx(d.p_d);
              if (od < 0 || od >= out_d) continue;
              for (idx ih = 0; ih < idx(d.in_h); ++ih) {
                idx oh = ih * idx(d.s_h) + kh - idx(d.p_h);
                if (oh < 0 || oh >= out_h) continue;
                for (idx iw = 0; iw < idx(d.in_w); ++iw) {
                  idx ow = iw * idx(d.s_w) + kw - idx(d.p_w);
                  if (ow < 0 || ow >= out_w) continue;
                  acc += in[((ic * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw] *
                         d_out[((oc * out_d + od) * out_h + oh) * out_w + ow];
                }
              }
            }
            d_weight[(((ic * idx(d.out_ch) + oc) * idx(d.k_d) + kd) * idx(d.k_h) + kh) * idx(d.k_w) +
                     kw] += acc;
          }
        }
      }
    }
  }
}

void maxpool3d_forward(const double* in, double* out, size_t* argmax, const PoolDims& d) {
  idx out_d = idx(d.out_d()), out_h = idx(d.out_h()), out_w = idx(d.out_w());
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx c = 0; c < idx(d.ch); ++c) {
    for (idx od = 0; od < out_d; ++od) {
      for (idx oh = 0; oh < out_h; ++oh) {
        for (idx ow = 0; ow < out_w; ++ow) {
          double best = -std::numeric_limits<double>::infinity();
          size_t best_idx = 0;
          for (idx kd = 0; kd < idx(d.k_d); ++kd) {
            for (idx kh = 0; kh < idx(d.k_h); ++kh) {
              for (idx kw = 0; kw < idx(d.k_w); ++kw) {
                idx id = od * idx(d.k_d) + kd;
                idx ih = oh * idx(d.k_h) + kh;
                idx iw = ow * idx(d.k_w) + kw;
                size_t at = size_t(((c * idx(d.in_d) + id) * idx(d.in_h) + ih) * idx(d.in_w) + iw);
                if (in[at] > best) {
                  best = in[at];
                  best_idx = at;
                }
              }
            }
          }
          size_t o = size_t(((c * out_d + od) * out_h + oh) * out_w + ow);
          out[o] = best;
          argmax[o] = best_idx;
        }
      }
    }
  }
}

void maxpool3d_backward(const size_t* argmax, const double* d_out, double* d_in,
                        const PoolDims& d) {
  idx spatial = idx(d.out_d() * d.out_h() * d.out_w());
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx c = 0; c < idx(d.ch); ++c) {
    // argmax of channel c always lies inside channel c's input slab
    for (idx i = c * spatial; i < (c + 1) * spatial; ++i) d_in[argmax[i]] += d_out[i];
  }
}

void dense_forward(const double* weight, const double* bias, const double* x, double* y,
                   size_t out_n, size_t in_n) {
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx o = 0; o < idx(out_n); ++o) {
    double acc = bias ? bias[o] : 0.0;
    const double* row = weight + size_t(o) * in_n;
    for (size_t i = 0; i < in_n; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void dense_backward_input(const double* weight, const double* dy, double* dx, size_t out_n,
                          size_t in_n) {
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx i = 0; i < idx(in_n); ++i) {
    double acc = 0.0;
    for (size_t o = 0; o < out_n; ++o) acc += weight[o * in_n + size_t(i)] * dy[o];
    dx[i] = acc;
  }
}

void dense_backward_params(const double* x, const double* dy, double* d_weight, double* d_bias,
                           size_t out_n, size_t in_n) {
  int threads = effective_threads();
#pragma omp parallel for num_threads(threads) schedule(static)
  for (idx o = 0; o < idx(out_n); ++o) {
    if (d_bias) d_bias[o] += dy[o];
    double g = dy[o];
    double* row = d_weight + size_t(o) * in_n;
    for (size_t i = 0; i < in_n; ++i) row[i] += g * x[i];
  }
}

}  // namespace trajtensor::kernels
