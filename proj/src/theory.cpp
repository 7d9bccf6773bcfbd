#include "attrib/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "attrib/rng.hpp"
#include "attrib/simmetrics.hpp"

namespace attrib {

namespace {
constexpr double kPi = 3.14159265358979323846;
// Fixed MC chunking: per-chunk seeds derive from the chunk index, so
// results do not depend on the thread count.
constexpr uint64_t kChunk = 1u << 14;
}  // namespace

double cauchy_tail(double K, double gamma) {
  if (gamma <= 0.0) {
    throw std::invalid_argument("cauchy_tail: gamma must be positive");
  }
  return 0.5 - std::atan(K / gamma) / kPi;
}

double ActivationSplit::k_factor() const {
  if (large.empty() || small.empty()) {
    throw std::invalid_argument("ActivationSplit: both sets must be nonempty");
  }
  double min_l = large[0], max_s = small[0];
  for (double v : large) {
    if (v < 0.0) throw std::invalid_argument("ActivationSplit: negative value");
    min_l = std::min(min_l, v);
  }
  for (double v : small) {
    if (v < 0.0) throw std::invalid_argument("ActivationSplit: negative value");
    max_s = std::max(max_s, v);
  }
  if (max_s <= 0.0 || min_l <= 0.0) {
    throw std::invalid_argument(
        "ActivationSplit: sets must contain positive values");
  }
  const double k = min_l / max_s;
  if (k < 1.0) {
    throw std::invalid_argument(
        "ActivationSplit: min(large) must be >= max(small)");
  }
  return k;
}

namespace {

OvertakingResult overtaking_impl(const ActivationSplit& split,
                                 uint64_t n_trials, uint64_t seed,
                                 bool averaged) {
  const double K = split.k_factor();
  const double nl = static_cast<double>(split.large.size());
  const double ns = static_cast<double>(split.small.size());

  double var_l = 0.0, var_s = 0.0;  // variances of the two weighted sums
  for (double v : split.large) var_l += v * v;
  for (double v : split.small) var_s += v * v;
  double scale_l = 1.0, scale_s = 1.0;
  if (averaged) {
    scale_l = 1.0 / nl;
    scale_s = 1.0 / ns;
    var_l /= nl * nl;
    var_s /= ns * ns;
  }

  OvertakingResult res;
  res.gamma1 = std::sqrt(var_s / var_l);
  res.gamma2 = averaged ? std::sqrt(nl / ns) : std::sqrt(ns / nl);
  res.exact = cauchy_tail(1.0, res.gamma1);
  res.bound = cauchy_tail(K, res.gamma2);
  res.trials = n_trials;

  const uint64_t n_chunks = (n_trials + kChunk - 1) / kChunk;
  std::vector<uint64_t> cond(n_chunks, 0), hits(n_chunks, 0);
#pragma omp parallel for schedule(static)
  for (uint64_t c = 0; c < n_chunks; ++c) {
    Rng rng(derive_seed(seed, c));
    const uint64_t lo = c * kChunk;
    const uint64_t hi = std::min(n_trials, lo + kChunk);
    uint64_t cc = 0, hh = 0;
    for (uint64_t t = lo; t < hi; ++t) {
      double sum_l = 0.0, sum_s = 0.0;
      for (double v : split.large) sum_l += rng.normal() * split.sigma * v;
      for (double v : split.small) sum_s += rng.normal() * split.sigma * v;
      sum_l *= scale_l;
      sum_s *= scale_s;
      if (sum_l > 0.0) {
        ++cc;
        if (sum_s >= sum_l) ++hh;
      }
    }
    cond[c] = cc;
    hits[c] = hh;
  }
  uint64_t n_cond = 0, n_hits = 0;
  for (uint64_t c = 0; c < n_chunks; ++c) {
    n_cond += cond[c];
    n_hits += hits[c];
  }
  res.conditioned_trials = n_cond;
  res.empirical =
      n_cond ? static_cast<double>(n_hits) / static_cast<double>(n_cond) : 0.0;
  res.empirical_unconditional =
      n_trials ? static_cast<double>(n_hits) / static_cast<double>(n_trials)
               : 0.0;
  res.mc_std =
      n_cond ? std::sqrt(res.empirical * (1.0 - res.empirical) /
                         static_cast<double>(n_cond))
             : 0.0;
  return res;
}

}  // namespace

OvertakingResult overtaking_probability_mc(const ActivationSplit& split,
                                           uint64_t n_trials, uint64_t seed) {
  return overtaking_impl(split, n_trials, seed, false);
}

OvertakingResult overtaking_probability_avg(const ActivationSplit& split,
                                            uint64_t n_trials, uint64_t seed) {
  return overtaking_impl(split, n_trials, seed, true);
}

namespace {

double draw_map_value(Rng& rng, MapDistribution dist) {
  if (dist == MapDistribution::Normal) return rng.normal();
  // zero-mean, unit-variance uniform
  return (rng.uniform01() - 0.5) * 3.4641016151377543864;
}

PatchStats single_window_terms(const std::vector<double>& a,
                               const std::vector<double>& b, double c1,
                               double c2) {
  return patch_stats(a.data(), b.data(), 0, a.size(), 1, c1, c2);
}

}  // namespace

SsimNoiseResult ssim_noise_mc(int patch, int n_trials, double c1, double c2,
                   uint64_t seed, MapDistribution dist) {
  if (patch < 2 || n_trials < 1) {
    throw std::invalid_argument("ssim_noise_mc: bad arguments");
  }
  const size_t n = static_cast<size_t>(patch) * patch;
  double sum_ssim = 0, sum_abs = 0, sum_sq = 0;
  double sum_lum = 0, sum_cov = 0, sum_var = 0;
  double control = 0;
  for (int t = 0; t < n_trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(t)));
    std::vector<double> a(n), b(n);
    for (size_t i = 0; i < n; ++i) a[i] = draw_map_value(rng, dist);
    for (size_t i = 0; i < n; ++i) b[i] = draw_map_value(rng, dist);
    const PatchStats terms = single_window_terms(a, b, c1, c2);
    const double v = terms.ssim();
    sum_ssim += v;
    sum_abs += std::fabs(v);
    sum_sq += v * v;
    sum_lum += terms.luminance();
    sum_cov += std::fabs(terms.covariance_term());
    sum_var += terms.var_a + terms.var_b;
    control += single_window_terms(a, a, c1, c2).ssim();
  }
  const double inv = 1.0 / static_cast<double>(n_trials);
  SsimNoiseResult res;
  res.mean_ssim = sum_ssim * inv;
  res.abs_mean_ssim = std::fabs(res.mean_ssim);
  res.mean_abs_ssim = sum_abs * inv;
  res.mean_luminance = sum_lum * inv;
  res.mean_covariance_term = sum_cov * inv;
  res.bound = c2 / (sum_var * inv + c2);
  res.mc_std = std::sqrt(std::max(0.0, sum_sq * inv - res.mean_ssim * res.mean_ssim) /
                         static_cast<double>(n_trials));
  res.control_ssim = control * inv;
  return res;
}

SpearmanNoiseResult spearman_noise_mc(size_t n, int n_trials, uint64_t seed) {
  if (n < 2 || n_trials < 1) {
    throw std::invalid_argument("spearman_noise_mc: bad arguments");
  }
  double sum = 0, sum_sq = 0, sum_ctrl = 0;
  for (int t = 0; t < n_trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(t)));
    std::vector<double> a(n), b(n), c(n);
    for (size_t i = 0; i < n; ++i) a[i] = rng.normal();
    for (size_t i = 0; i < n; ++i) b[i] = rng.normal();
    for (size_t i = 0; i < n; ++i) c[i] = a[i] + 0.5 * rng.normal();
    const double indep =
        spearman(Tensor({n}, a), Tensor({n}, b)).value;
    sum += indep;
    sum_sq += indep * indep;
    sum_ctrl += spearman(Tensor({n}, a), Tensor({n}, c)).value;
  }
  const double inv = 1.0 / static_cast<double>(n_trials);
  SpearmanNoiseResult res;
  res.mean_spearman = sum * inv;
  res.mc_std = std::sqrt(
      std::max(0.0, sum_sq * inv - res.mean_spearman * res.mean_spearman) /
      static_cast<double>(n_trials));
  res.control_mean = sum_ctrl * inv;
  return res;
}

MseMcResult mse_mc(size_t n, int n_trials, uint64_t seed) {
  if (n < 2 || n_trials < 1) {
    throw std::invalid_argument("mse_mc: bad arguments");
  }
  double sum = 0, sum_sq = 0;
  MseMcResult res;
  for (int t = 0; t < n_trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(t)));
    std::vector<double> a(n), b(n);
    for (size_t i = 0; i < n; ++i) a[i] = rng.normal();
    for (size_t i = 0; i < n; ++i) b[i] = rng.normal();
    const Tensor ta({n}, a), tb({n}, b);
    const double v = mse_normalized(ta, tb).value;
    sum += v;
    sum_sq += v * v;
    if (t == 0) {
      res.identical = mse_normalized(ta, ta).value;
      Tensor neg = ta;
      for (size_t i = 0; i < n; ++i) neg[i] = -neg[i];
      res.negated = mse_normalized(ta, neg).value;
    }
  }
  const double inv = 1.0 / static_cast<double>(n_trials);
  res.mean = sum * inv;
  res.mc_std =
      std::sqrt(std::max(0.0, sum_sq * inv - res.mean * res.mean) /
                static_cast<double>(n_trials));
  return res;
}

std::array<double, QuantileTable::kNumQ> QuantileTable::quantiles() {
  std::array<double, kNumQ> qs{};
  for (int i = 0; i < kNumQ; ++i) qs[i] = 0.10 + 0.05 * i;
  return qs;
}

double QuantileTable::value_at(size_t layer, double q) const {
  const auto qs = quantiles();
  for (int i = 0; i < kNumQ; ++i) {
    if (std::fabs(qs[i] - q) < 1e-9) return values.at(layer)[i];
  }
  throw std::invalid_argument("QuantileTable: quantile not tabulated");
}

namespace {
/// Linear interpolation between order statistics of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = q * (static_cast<double>(sorted.size()) - 1.0);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}
}  // namespace

QuantileTable activation_stats(const ModelGraph& m, const Dataset& data,
                               const std::vector<size_t>& indices) {
  std::vector<size_t> idx = indices;
  if (idx.empty()) {
    idx.resize(data.count());
    std::iota(idx.begin(), idx.end(), 0);
  }
  if (idx.empty()) throw std::invalid_argument("activation_stats: no images");
  const auto qs = QuantileTable::quantiles();

  QuantileTable table;
  table.n_images = idx.size();
  std::vector<int> layers;
  for (int id = 1; id < m.node_count(); ++id) {
    layers.push_back(id);
    table.layer_names.push_back(m.node(id).name);
  }
  table.values.assign(layers.size(), {});
  table.nonpositive_fraction.assign(layers.size(), 0.0);

  std::vector<std::vector<std::array<double, QuantileTable::kNumQ>>> per_img(
      idx.size());
  std::vector<std::vector<double>> per_img_frac(idx.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < idx.size(); ++i) {
    const ForwardResult fr = forward(m, data.image(idx[i]));
    per_img[i].resize(layers.size());
    per_img_frac[i].resize(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) {
      // pool across spatial and channel dimensions
      std::vector<double> pooled(fr.acts[layers[l]].values());
      size_t nonpos = 0;
      for (double v : pooled) {
        if (v <= 0.0) ++nonpos;
      }
      std::sort(pooled.begin(), pooled.end());
      for (int k = 0; k < QuantileTable::kNumQ; ++k) {
        per_img[i][l][k] = quantile_sorted(pooled, qs[k]);
      }
      per_img_frac[i][l] =
          static_cast<double>(nonpos) / static_cast<double>(pooled.size());
    }
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (size_t l = 0; l < layers.size(); ++l) {
    for (int k = 0; k < QuantileTable::kNumQ; ++k) {
      double acc = 0.0;
      for (size_t i = 0; i < idx.size(); ++i) acc += per_img[i][l][k];
      table.values[l][k] = acc * inv;
    }
    double acc = 0.0;
    for (size_t i = 0; i < idx.size(); ++i) acc += per_img_frac[i][l];
    table.nonpositive_fraction[l] = acc * inv;
  }
  return table;
}

std::vector<OvertakingCell> quantile_overtaking(
    const QuantileTable& table, const std::vector<double>& q_h,
    const std::vector<double>& q_l) {
  std::vector<OvertakingCell> cells;
  for (size_t l = 0; l < table.layer_names.size(); ++l) {
    for (double qh : q_h) {
      for (double ql : q_l) {
        if (qh <= ql) {
          throw std::invalid_argument(
              "quantile_overtaking: q_h must exceed q_l");
        }
        OvertakingCell cell;
        cell.layer = table.layer_names[l];
        cell.q_h = qh;
        cell.q_l = ql;
        cell.gamma = std::sqrt(ql / (1.0 - qh));
        const double vh = table.value_at(l, qh);
        const double vl = table.value_at(l, ql);
        if (vl <= 1e-9) {
          // vanishing bottom quantile: the small set cannot overtake
          cell.K = 0.0;
          cell.p = 0.0;
        } else {
          cell.K = vh / vl;
          cell.p = cauchy_tail(cell.K, cell.gamma);
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

double shapley_exact(const std::vector<double>& w, double b,
                     const std::function<double(double)>& g,
                     const std::vector<double>& x, size_t feature) {
  const size_t d = w.size();
  if (x.size() != d) {
    throw std::invalid_argument("shapley_exact: w and x sizes differ");
  }
  if (feature >= d) {
    throw std::invalid_argument("shapley_exact: feature index out of range");
  }
  if (d > 12) {
    throw std::invalid_argument("shapley_exact: d > 12 not enumerable");
  }
  // binomials C(d-1, s) fit doubles exactly at this size
  std::vector<double> binom(d, 1.0);
  for (size_t s = 1; s < d; ++s) {
    binom[s] = binom[s - 1] * static_cast<double>(d - s) / static_cast<double>(s);
  }
  const uint32_t full = 1u << d;
  double phi = 0.0;
  for (uint32_t mask = 0; mask < full; ++mask) {
    if (mask & (1u << feature)) continue;
    double z = b;
    int size = 0;
    for (size_t k = 0; k < d; ++k) {
      if (mask & (1u << k)) {
        z += w[k] * x[k];
        ++size;
      }
    }
    const double weight = 1.0 / (static_cast<double>(d) * binom[size]);
    phi += weight * (g(z + w[feature] * x[feature]) - g(z));
  }
  return phi;
}

MonotonicityResult monotonicity_test(MonotoneMethod method, int n_instances,
                                     uint64_t seed, bool strong) {
  if (strong && method != MonotoneMethod::GradientXInput) {
    throw std::invalid_argument(
        "monotonicity_test: strong form applies to gradient x input");
  }
  MonotonicityResult res;
  for (int inst = 0; inst < n_instances; ++inst) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(inst)));
    const size_t d = 2 + rng.below(7);  // 2..8 features
    std::vector<double> w(d), x(d), contrib(d);
    double z;
    do {
      for (size_t i = 0; i < d; ++i) w[i] = rng.normal();
      for (size_t i = 0; i < d; ++i) x[i] = rng.normal();
      z = rng.normal();  // bias
      for (size_t i = 0; i < d; ++i) {
        contrib[i] = w[i] * x[i];
        z += contrib[i];
      }
    } while (z <= 0.0);  // positive pre-activation region
    const double bias = z - std::accumulate(contrib.begin(), contrib.end(), 0.0);

    std::vector<double> r(d);
    switch (method) {
      case MonotoneMethod::GradientXInput:
        // g = ReLU, active branch: R_i = w_i x_i
        for (size_t i = 0; i < d; ++i) r[i] = contrib[i];
        break;
      case MonotoneMethod::LrpBeta: {
        const double beta = 3.0 * rng.uniform01();
        double zp = 0.0, zn = 0.0;
        for (double c : contrib) (c > 0.0 ? zp : zn) += c;
        const double rz = z;  // relevance of the (positive) output
        for (size_t i = 0; i < d; ++i) {
          double v = 0.0;
          if (contrib[i] > 0.0 && zp > 0.0) v += rz * (1.0 + beta) * contrib[i] / zp;
          if (contrib[i] < 0.0 && zn < 0.0) v -= rz * beta * contrib[i] / zn;
          r[i] = v;
        }
        break;
      }
      case MonotoneMethod::ShapleyExact: {
        // monotone non-decreasing activations
        const int pick = static_cast<int>(rng.below(3));
        std::function<double(double)> g;
        if (pick == 0) {
          g = [](double t) { return std::max(t, 0.0); };
        } else if (pick == 1) {
          g = [](double t) { return t; };
        } else {
          g = [](double t) { return std::log1p(std::exp(std::min(t, 40.0))); };
        }
        for (size_t i = 0; i < d; ++i) {
          r[i] = shapley_exact(w, bias, g, x, i);
        }
        break;
      }
    }

    for (size_t i = 0; i < d; ++i) {
      for (size_t j = 0; j < d; ++j) {
        if (i == j) continue;
        const bool applies =
            strong ? std::fabs(contrib[i]) >= std::fabs(contrib[j]) &&
                         contrib[j] != 0.0
                   : contrib[i] >= contrib[j] && contrib[j] > 0.0;
        if (!applies) continue;
        ++res.pairs_checked;
        if (std::fabs(r[i]) < std::fabs(r[j]) - 1e-12) ++res.violations;
      }
    }
  }
  return res;
}

DominanceResult positive_dominance_check(const ModelGraph& m, const Tensor& x,
                                         int target, const LrpConfig& cfg) {
  for (int id = 0; id < m.node_count(); ++id) {
    const LayerSpec& n = m.node(id);
    for (size_t i = 0; i < n.bias.size(); ++i) {
      if (n.bias[i] > 0.0) {
        throw std::invalid_argument(
            "positive_dominance_check: node '" + n.name +
            "' has a positive bias");
      }
    }
  }
  const double logit = forward(m, x).logits(m)[target];
  if (logit <= 0.0) {
    throw std::invalid_argument(
        "positive_dominance_check: target logit must be positive, got " +
        std::to_string(logit));
  }
  const LrpResult r = lrp(m, x, target, cfg);
  DominanceResult out;
  out.logit = logit;
  out.layer_names = r.layer_names;
  out.layer_sums = r.layer_sums;
  out.all_positive = true;
  for (double s : r.layer_sums) {
    if (s <= 0.0) out.all_positive = false;
  }
  for (int id = 0; id < m.node_count(); ++id) {
    if (!m.node(id).has_params()) continue;
    out.max_rel_err = std::max(
        out.max_rel_err, std::fabs(r.layer_sums[id] - logit) / logit);
  }
  return out;
}

}  // namespace attrib
