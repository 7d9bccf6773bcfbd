#pragma once

#include <cstddef>

namespace attrib::kernels {

/// Geometry of a 2-D convolution over a single (C,H,W) sample.
/// Zero padding; (in + 2*pad - k) must be divisible by stride.
struct Conv2DSpec {
  int in_c = 0, out_c = 0;
  int in_h = 0, in_w = 0;
  int k = 0, stride = 1, pad = 0;

  int out_h() const { return (in_h + 2 * pad - k) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - k) / stride + 1; }
};

// Each kernel comes in two flavours: the OpenMP-parallel default and a
// plain serial reference (suffix _ref). The parallel versions split work
// only across output elements and keep the per-element accumulation order
// identical to the reference, so outputs are bit-identical. Tests compare
// the two; tools/bench_kernels times them.

// y[oc][oh][ow]; w[oc][ic][k][k]; b[oc]
void conv2d_forward(const double* x, const Conv2DSpec& s, const double* w,
                    const double* b, double* y);
void conv2d_forward_ref(const double* x, const Conv2DSpec& s, const double* w,
                        const double* b, double* y);

// gx[ic][ih][iw] from gy[oc][oh][ow]
void conv2d_backward_data(const double* gy, const Conv2DSpec& s,
                          const double* w, double* gx);
void conv2d_backward_data_ref(const double* gy, const Conv2DSpec& s,
                              const double* w, double* gx);

// gw[oc][ic][k][k] and gb[oc] (gb may be null); accumulates into gw/gb
void conv2d_backward_weights(const double* x, const double* gy,
                             const Conv2DSpec& s, double* gw, double* gb);
void conv2d_backward_weights_ref(const double* x, const double* gy,
                                 const Conv2DSpec& s, double* gw, double* gb);

// y[o] = b[o] + sum_i w[o*in+i] * x[i]
void dense_forward(const double* x, const double* w, const double* b, int in,
                   int out, double* y);
void dense_forward_ref(const double* x, const double* w, const double* b,
                       int in, int out, double* y);

// gx[i] = sum_o w[o*in+i] * gy[o]
void dense_backward_data(const double* gy, const double* w, int in, int out,
                         double* gx);
void dense_backward_data_ref(const double* gy, const double* w, int in,
                             int out, double* gx);

/// Box filter with zero-padded borders and constant divisor k*k,
/// applied per channel. k must be odd.
void box_blur(const double* x, int c, int h, int w, int k, double* y);
void box_blur_ref(const double* x, int c, int h, int w, int k, double* y);

}  // namespace attrib::kernels
