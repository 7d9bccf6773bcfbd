#pragma once

#include <string>
#include <vector>

#include "attrib/tensor.hpp"

namespace attrib {

/// Scales a map so the mean of its squared values is exactly 1.
/// Distances to zero then compare across methods. Errors on all-zero maps.
Tensor normalize_second_moment(const Tensor& map);

/// Divides by max |value|. Kept for the high-variance normalization
/// comparison; errors on all-zero maps.
Tensor normalize_max_abs(const Tensor& map);

struct SimilarityReport {
  std::string metric;
  double value = 0.0;
  std::vector<double> per_patch;  // filled for windowed ssim
  std::string normalization = "none";
};

/// Population first/second-moment statistics of one window pair plus the
/// stabilizer constants; the two SSIM factors come straight from these.
struct PatchStats {
  double mu_a = 0.0, mu_b = 0.0;
  double var_a = 0.0, var_b = 0.0;
  double cov = 0.0;
  double c1 = 0.0, c2 = 0.0;

  double luminance() const {
    return (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
  }
  double covariance_term() const {
    return (2.0 * cov + c2) / (var_a + var_b + c2);
  }
  double ssim() const { return luminance() * covariance_term(); }
};

/// Stats over one window; `row_stride` steps between rows of the window
/// (use count_per_row with rows = 1 for a flat window).
PatchStats patch_stats(const double* a, const double* b, size_t row_stride,
                       size_t count_per_row, size_t rows, double c1,
                       double c2);

/// Uniform-window statistics with population (1/n) variance. The default
/// constants assume a dynamic range of 2 after second-moment normalization.
struct SsimOptions {
  int window = 7;
  int stride = 1;
  double c1 = 4e-4;   // (0.01 * 2)^2
  double c2 = 3.6e-3; // (0.03 * 2)^2
  /// One window spanning the whole map; used by the noise-floor oracles.
  bool single_window = false;
};

SimilarityReport ssim(const Tensor& a, const Tensor& b,
                      const SsimOptions& opt = {});

/// Pearson correlation of ranks (average rank on ties).
/// Errors on constant inputs or fewer than two elements.
SimilarityReport spearman(const Tensor& a, const Tensor& b);

/// Mean squared difference of second-moment-normalized maps.
SimilarityReport mse_normalized(const Tensor& a, const Tensor& b);

SimilarityReport mse_raw(const Tensor& a, const Tensor& b);

}  // namespace attrib
