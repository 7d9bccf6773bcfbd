#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "attrib/attribution.hpp"
#include "attrib/zoo.hpp"

namespace attrib {

/// Tail probability P(Z >= K) of a centered Cauchy with scale gamma:
/// 0.5 - atan(K/gamma)/pi. Errors on gamma <= 0.
double cauchy_tail(double K, double gamma);

/// Two sets of non-negative activations with min(large) >= K * max(small).
struct ActivationSplit {
  std::vector<double> large;
  std::vector<double> small;
  double sigma = 1.0;  // weight std; cancels in the ratio

  /// Separation factor min(large)/max(small); validates the invariants.
  double k_factor() const;
};

/// Probability that the summed contribution of the small set overtakes the
/// large set under zero-mean normal weights, conditioned on the large sum
/// being positive. The ratio is Cauchy, so the exact value and the
/// size-based bound come along; the unconditional probability is half the
/// conditional one.
struct OvertakingResult {
  double empirical = 0.0;        // conditional MC estimate
  double empirical_unconditional = 0.0;
  double exact = 0.0;            // Cauchy tail at gamma_1
  double bound = 0.0;            // Cauchy tail at K with gamma_2
  double gamma1 = 0.0, gamma2 = 0.0;
  double mc_std = 0.0;           // binomial std error of `empirical`
  uint64_t trials = 0, conditioned_trials = 0;
};

OvertakingResult overtaking_probability_mc(const ActivationSplit& split,
                                           uint64_t n_trials, uint64_t seed);

/// Same event with per-set means; the bound uses the inverted size ratio.
OvertakingResult overtaking_probability_avg(const ActivationSplit& split,
                                            uint64_t n_trials, uint64_t seed);

enum class MapDistribution { Normal, Uniform };

/// Single-window SSIM between i.i.d. map pairs. The headline value is the
/// absolute trial-mean of the signed SSIM (the estimator of the expected
/// SSIM the bound applies to); the per-trial absolute mean and the term
/// means are reported for diagnostics.
struct SsimNoiseResult {
  double mean_ssim = 0.0;      // signed trial mean
  double abs_mean_ssim = 0.0;  // |mean_ssim|
  double mean_abs_ssim = 0.0;
  double mean_luminance = 0.0;
  double mean_covariance_term = 0.0;
  double bound = 0.0;  // C2 / (var_a + var_b + C2) from empirical variances
  double mc_std = 0.0;
  double control_ssim = 0.0;  // B = A pairs
};

SsimNoiseResult ssim_noise_mc(int patch, int n_trials, double c1, double c2,
                   uint64_t seed,
                   MapDistribution dist = MapDistribution::Normal);

struct SpearmanNoiseResult {
  double mean_spearman = 0.0;  // independent pairs
  double mc_std = 0.0;
  double control_mean = 0.0;  // B = A + 0.5*noise
};

SpearmanNoiseResult spearman_noise_mc(size_t n, int n_trials, uint64_t seed);

struct MseMcResult {
  double mean = 0.0;  // independent pairs, second-moment normalized
  double mc_std = 0.0;
  double identical = 0.0;  // B = A
  double negated = 0.0;    // B = -A
};

MseMcResult mse_mc(size_t n, int n_trials, uint64_t seed);

/// Mean per-image quantile estimates of pooled post-activation values, one
/// row per layer, plus the fraction of non-positive activations.
struct QuantileTable {
  static constexpr int kNumQ = 18;
  static std::array<double, kNumQ> quantiles();  // 0.10 .. 0.95 step 0.05

  std::vector<std::string> layer_names;
  std::vector<std::array<double, kNumQ>> values;  // V(q) per layer
  std::vector<double> nonpositive_fraction;
  size_t n_images = 0;

  double value_at(size_t layer, double q) const;
};

QuantileTable activation_stats(const ModelGraph& m, const Dataset& data,
                               const std::vector<size_t>& indices = {});

struct OvertakingCell {
  std::string layer;
  double q_h = 0.0, q_l = 0.0;
  double K = 0.0, gamma = 0.0, p = 0.0;
};

/// K = V(q_h)/V(q_l), gamma = sqrt(q_l/(1-q_h)); P = 0 where the bottom
/// quantile vanishes (<= 1e-9).
std::vector<OvertakingCell> quantile_overtaking(
    const QuantileTable& table,
    const std::vector<double>& q_h = {0.85, 0.9, 0.95},
    const std::vector<double>& q_l = {0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4,
                                      0.45, 0.5});

/// Exact Shapley value of feature i for a single neuron g(w.x + b) by
/// subset enumeration; absent features are set to 0. d <= 12.
double shapley_exact(const std::vector<double>& w, double b,
                     const std::function<double(double)>& g,
                     const std::vector<double>& x, size_t feature);

enum class MonotoneMethod { GradientXInput, LrpBeta, ShapleyExact };

struct MonotonicityResult {
  int violations = 0;
  long pairs_checked = 0;
};

/// Random single-neuron instances; counts |R| ordering violations over
/// pairs with w_i x_i >= w_j x_j > 0. `strong` checks the |w_i x_i| >=
/// |w_j x_j| variant (gradient x input only).
MonotonicityResult monotonicity_test(MonotoneMethod method, int n_instances,
                                     uint64_t seed, bool strong = false);

struct DominanceResult {
  std::vector<std::string> layer_names;
  std::vector<double> layer_sums;
  double logit = 0.0;
  bool all_positive = false;
  double max_rel_err = 0.0;  // vs the logit, over parameterized layers
};

/// Per-layer relevance sums for a ReLU net with non-positive biases and a
/// positive target logit. Exact equality with the logit is asserted by
/// callers only for bias-free nets.
DominanceResult positive_dominance_check(const ModelGraph& m, const Tensor& x,
                                         int target, const LrpConfig& cfg);

}  // namespace attrib
