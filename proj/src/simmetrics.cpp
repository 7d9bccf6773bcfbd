#include "attrib/simmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace attrib {

Tensor normalize_second_moment(const Tensor& map) {
  const double m2 = map.second_moment();
  if (m2 <= 0.0) {
    throw std::invalid_argument(
        "normalize_second_moment: map is all-zero");
  }
  const double inv = 1.0 / std::sqrt(m2);
  Tensor out = map;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= inv;
  return out;
}

Tensor normalize_max_abs(const Tensor& map) {
  const double mx = map.abs_max();
  if (mx <= 0.0) {
    throw std::invalid_argument("normalize_max_abs: map is all-zero");
  }
  Tensor out = map;
  for (size_t i = 0; i < out.size(); ++i) out[i] /= mx;
  return out;
}

PatchStats patch_stats(const double* a, const double* b, size_t row_stride,
                       size_t count_per_row, size_t rows, double c1,
                       double c2) {
  const double n = static_cast<double>(count_per_row * rows);
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (size_t r = 0; r < rows; ++r) {
    const double* pa = a + r * row_stride;
    const double* pb = b + r * row_stride;
    for (size_t i = 0; i < count_per_row; ++i) {
      sa += pa[i];
      sb += pb[i];
      saa += pa[i] * pa[i];
      sbb += pb[i] * pb[i];
      sab += pa[i] * pb[i];
    }
  }
  PatchStats s;
  s.mu_a = sa / n;
  s.mu_b = sb / n;
  s.var_a = saa / n - s.mu_a * s.mu_a;
  s.var_b = sbb / n - s.mu_b * s.mu_b;
  s.cov = sab / n - s.mu_a * s.mu_b;
  s.c1 = c1;
  s.c2 = c2;
  return s;
}

namespace {

double ssim_term(const double* a, const double* b, size_t stride_between,
                 size_t count_per_row, size_t rows, double c1, double c2) {
  return patch_stats(a, b, stride_between, count_per_row, rows, c1, c2).ssim();
}

}  // namespace

SimilarityReport ssim(const Tensor& a, const Tensor& b,
                      const SsimOptions& opt) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("ssim: shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  SimilarityReport rep;
  rep.metric = "ssim";
  if (opt.single_window) {
    rep.value = ssim_term(a.data(), b.data(), 0, a.size(), 1, opt.c1, opt.c2);
    rep.per_patch = {rep.value};
    return rep;
  }
  // windows slide over the last two axes; rank-1 maps are one pixel row
  size_t h = 1, w = a.size();
  if (a.rank() >= 2) {
    h = a.shape()[a.rank() - 2];
    w = a.shape()[a.rank() - 1];
  }
  const size_t planes = a.size() / (h * w);
  const size_t win_h = std::min<size_t>(opt.window, h);
  const size_t win_w = std::min<size_t>(opt.window, w);
  if (opt.window <= 0 || opt.stride <= 0) {
    throw std::invalid_argument("ssim: bad window/stride");
  }
  double sum = 0.0;
  size_t count = 0;
  for (size_t p = 0; p < planes; ++p) {
    const double* pa = a.data() + p * h * w;
    const double* pb = b.data() + p * h * w;
    for (size_t r = 0; r + win_h <= h; r += opt.stride) {
      for (size_t c = 0; c + win_w <= w; c += opt.stride) {
        const double v = ssim_term(pa + r * w + c, pb + r * w + c, w, win_w,
                                   win_h, opt.c1, opt.c2);
        rep.per_patch.push_back(v);
        sum += v;
        ++count;
      }
    }
  }
  rep.value = sum / static_cast<double>(count);
  return rep;
}

namespace {

std::vector<double> ranks_of(const Tensor& t) {
  const size_t n = t.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return t[i] < t[j]; });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && t[order[j + 1]] == t[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j));
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double vx = sxx / n - (sx / n) * (sx / n);
  const double vy = syy / n - (sy / n) * (sy / n);
  const double cov = sxy / n - (sx / n) * (sy / n);
  if (vx <= 0.0 || vy <= 0.0) {
    throw std::invalid_argument("correlation undefined for constant input");
  }
  return cov / std::sqrt(vx * vy);
}

}  // namespace

SimilarityReport spearman(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("spearman: shape mismatch");
  }
  if (a.size() < 2) {
    throw std::invalid_argument("spearman: need at least two elements");
  }
  SimilarityReport rep;
  rep.metric = "spearman";
  rep.value = pearson(ranks_of(a), ranks_of(b));
  return rep;
}

SimilarityReport mse_normalized(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("mse_normalized: shape mismatch");
  }
  const Tensor na = normalize_second_moment(a);
  const Tensor nb = normalize_second_moment(b);
  double acc = 0.0;
  for (size_t i = 0; i < na.size(); ++i) {
    const double d = na[i] - nb[i];
    acc += d * d;
  }
  SimilarityReport rep;
  rep.metric = "mse_normalized";
  rep.normalization = "second_moment";
  rep.value = acc / static_cast<double>(na.size());
  return rep;
}

SimilarityReport mse_raw(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("mse_raw: shape mismatch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  SimilarityReport rep;
  rep.metric = "mse_raw";
  rep.value = acc / static_cast<double>(a.size());
  return rep;
}

}  // namespace attrib
