#include "attrib/kernels.hpp"

namespace attrib::kernels {

namespace {
// Parallel regions only pay off once there is enough arithmetic per region.
constexpr long kParallelCutoff = 16384;
}  // namespace

void conv2d_forward_ref(const double* x, const Conv2DSpec& s, const double* w,
                        const double* b, double* y) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int oc = 0; oc < s.out_c; ++oc) {
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        double acc = b ? b[oc] : 0.0;
        for (int ic = 0; ic < s.in_c; ++ic) {
          for (int kr = 0; kr < s.k; ++kr) {
            const int ir = r * s.stride - s.pad + kr;
            if (ir < 0 || ir >= s.in_h) continue;
            for (int kc = 0; kc < s.k; ++kc) {
              const int icol = c * s.stride - s.pad + kc;
              if (icol < 0 || icol >= s.in_w) continue;
              acc += x[(ic * s.in_h + ir) * s.in_w + icol] *
                     w[((oc * s.in_c + ic) * s.k + kr) * s.k + kc];
            }
          }
        }
        y[(oc * oh + r) * ow + c] = acc;
      }
    }
  }
}

void conv2d_forward(const double* x, const Conv2DSpec& s, const double* w,
                    const double* b, double* y) {
  const int oh = s.out_h(), ow = s.out_w();
  const long work = static_cast<long>(s.out_c) * oh * ow * s.in_c * s.k * s.k;
#pragma omp parallel for collapse(2) schedule(static) \
    if (work > kParallelCutoff)
  for (int oc = 0; oc < s.out_c; ++oc) {
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        double acc = b ? b[oc] : 0.0;
        for (int ic = 0; ic < s.in_c; ++ic) {
          for (int kr = 0; kr < s.k; ++kr) {
            const int ir = r * s.stride - s.pad + kr;
            if (ir < 0 || ir >= s.in_h) continue;
            for (int kc = 0; kc < s.k; ++kc) {
              const int icol = c * s.stride - s.pad + kc;
              if (icol < 0 || icol >= s.in_w) continue;
              acc += x[(ic * s.in_h + ir) * s.in_w + icol] *
                     w[((oc * s.in_c + ic) * s.k + kr) * s.k + kc];
            }
          }
        }
        y[(oc * oh + r) * ow + c] = acc;
      }
    }
  }
}

void conv2d_backward_data_ref(const double* gy, const Conv2DSpec& s,
                              const double* w, double* gx) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int ic = 0; ic < s.in_c; ++ic) {
    for (int ir = 0; ir < s.in_h; ++ir) {
      for (int icol = 0; icol < s.in_w; ++icol) {
        double acc = 0.0;
        for (int oc = 0; oc < s.out_c; ++oc) {
          for (int kr = 0; kr < s.k; ++kr) {
            const int rs = ir + s.pad - kr;
            if (rs < 0 || rs % s.stride != 0) continue;
            const int r = rs / s.stride;
            if (r >= oh) continue;
            for (int kc = 0; kc < s.k; ++kc) {
              const int cs = icol + s.pad - kc;
              if (cs < 0 || cs % s.stride != 0) continue;
              const int c = cs / s.stride;
              if (c >= ow) continue;
              acc += gy[(oc * oh + r) * ow + c] *
                     w[((oc * s.in_c + ic) * s.k + kr) * s.k + kc];
            }
          }
        }
        gx[(ic * s.in_h + ir) * s.in_w + icol] = acc;
      }
    }
  }
}

void conv2d_backward_data(const double* gy, const Conv2DSpec& s,
                          const double* w, double* gx) {
  const int oh = s.out_h(), ow = s.out_w();
  const long work =
      static_cast<long>(s.in_c) * s.in_h * s.in_w * s.out_c * s.k * s.k;
#pragma omp parallel for collapse(2) schedule(static) \
    if (work > kParallelCutoff)
  for (int ic = 0; ic < s.in_c; ++ic) {
    for (int ir = 0; ir < s.in_h; ++ir) {
      for (int icol = 0; icol < s.in_w; ++icol) {
        double acc = 0.0;
        for (int oc = 0; oc < s.out_c; ++oc) {
          for (int kr = 0; kr < s.k; ++kr) {
            const int rs = ir + s.pad - kr;
            if (rs < 0 || rs % s.stride != 0) continue;
            const int r = rs / s.stride;
            if (r >= oh) continue;
            for (int kc = 0; kc < s.k; ++kc) {
              const int cs = icol + s.pad - kc;
              if (cs < 0 || cs % s.stride != 0) continue;
              const int c = cs / s.stride;
              if (c >= ow) continue;
              acc += gy[(oc * oh + r) * ow + c] *
                     w[((oc * s.in_c + ic) * s.k + kr) * s.k + kc];
            }
          }
        }
        gx[(ic * s.in_h + ir) * s.in_w + icol] = acc;
      }
    }
  }
}

void conv2d_backward_weights_ref(const double* x, const double* gy,
                                 const Conv2DSpec& s, double* gw, double* gb) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int oc = 0; oc < s.out_c; ++oc) {
    for (int ic = 0; ic < s.in_c; ++ic) {
      for (int kr = 0; kr < s.k; ++kr) {
        for (int kc = 0; kc < s.k; ++kc) {
          double acc = 0.0;
          for (int r = 0; r < oh; ++r) {
            const int ir = r * s.stride - s.pad + kr;
            if (ir < 0 || ir >= s.in_h) continue;
            for (int c = 0; c < ow; ++c) {
              const int icol = c * s.stride - s.pad + kc;
              if (icol < 0 || icol >= s.in_w) continue;
              acc += gy[(oc * oh + r) * ow + c] *
                     x[(ic * s.in_h + ir) * s.in_w + icol];
            }
          }
          gw[((oc * s.in_c + ic) * s.k + kr) * s.k + kc] += acc;
        }
      }
    }
    if (gb) {
      double acc = 0.0;
      for (int i = 0; i < oh * ow; ++i) acc += gy[oc * oh * ow + i];
      gb[oc] += acc;
    }
  }
}

void conv2d_backward_weights(const double* x, const double* gy,
                             const Conv2DSpec& s, double* gw, double* gb) {
  const int oh = s.out_h(), ow = s.out_w();
  const long work =
      static_cast<long>(s.out_c) * s.in_c * s.k * s.k * oh * ow;
#pragma omp parallel for collapse(2) schedule(static) \
    if (work > kParallelCutoff)
  for (int oc = 0; oc < s.out_c; ++oc) {
    for (int ic = 0; ic < s.in_c; ++ic) {
      for (int kr = 0; kr < s.k; ++kr) {
        for (int kc = 0; kc < s.k; ++kc) {
          double acc = 0.0;
          for (int r = 0; r < oh; ++r) {
            const int ir = r * s.stride - s.pad + kr;
            if (ir < 0 || ir >= s.in_h) continue;
            for (int c = 0; c < ow; ++c) {
              const int icol = c * s.stride - s.pad + kc;
              if (icol < 0 || icol >= s.in_w) continue;
              acc += gy[(oc * oh + r) * ow + c] *
                     x[(ic * s.in_h + ir) * s.in_w + icol];
            }
          }
          gw[((oc * s.in_c + ic) * s.k + kr) * s.k + kc] += acc;
        }
      }
    }
  }
  if (gb) {
    for (int oc = 0; oc < s.out_c; ++oc) {
      double acc = 0.0;
      for (int i = 0; i < oh * ow; ++i) acc += gy[oc * oh * ow + i];
      gb[oc] += acc;
    }
  }
}

void dense_forward_ref(const double* x, const double* w, const double* b,
                       int in, int out, double* y) {
  for (int o = 0; o < out; ++o) {
    double acc = b ? b[o] : 0.0;
    const double* row = w + static_cast<size_t>(o) * in;
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void dense_forward(const double* x, const double* w, const double* b, int in,
                   int out, double* y) {
  const long work = static_cast<long>(in) * out;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
  for (int o = 0; o < out; ++o) {
    double acc = b ? b[o] : 0.0;
    const double* row = w + static_cast<size_t>(o) * in;
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void dense_backward_data_ref(const double* gy, const double* w, int in,
                             int out, double* gx) {
  for (int i = 0; i < in; ++i) {
    double acc = 0.0;
    for (int o = 0; o < out; ++o) acc += w[static_cast<size_t>(o) * in + i] * gy[o];
    gx[i] = acc;
  }
}

void dense_backward_data(const double* gy, const double* w, int in, int out,
                         double* gx) {
  const long work = static_cast<long>(in) * out;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
  for (int i = 0; i < in; ++i) {
    double acc = 0.0;
    for (int o = 0; o < out; ++o) acc += w[static_cast<size_t>(o) * in + i] * gy[o];
    gx[i] = acc;
  }
}

void box_blur_ref(const double* x, int c, int h, int w, int k, double* y) {
  const double inv = 1.0 / (static_cast<double>(k) * k);
  const int half = k / 2;
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int di = -half; di <= half; ++di) {
          const int ii = i + di;
          if (ii < 0 || ii >= h) continue;
          for (int dj = -half; dj <= half; ++dj) {
            const int jj = j + dj;
            if (jj < 0 || jj >= w) continue;
            acc += x[(ch * h + ii) * w + jj];
          }
        }
        y[(ch * h + i) * w + j] = acc * inv;
      }
    }
  }
}

void box_blur(const double* x, int c, int h, int w, int k, double* y) {
  const double inv = 1.0 / (static_cast<double>(k) * k);
  const int half = k / 2;
  const long work = static_cast<long>(c) * h * w * k * k;
#pragma omp parallel for collapse(2) schedule(static) \
    if (work > kParallelCutoff)
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int di = -half; di <= half; ++di) {
          const int ii = i + di;
          if (ii < 0 || ii >= h) continue;
          for (int dj = -half; dj <= half; ++dj) {
            const int jj = j + dj;
            if (jj < 0 || jj >= w) continue;
            acc += x[(ch * h + ii) * w + jj];
          }
        }
        y[(ch * h + i) * w + j] = acc * inv;
      }
    }
  }
}

}  // namespace attrib::kernels
