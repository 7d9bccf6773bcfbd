#include "attrib/sanity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "attrib/csv.hpp"

namespace attrib {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}
}  // namespace

std::string Preprocess::id() const {
  std::string s = absolute ? "abs" : "signed";
  s += "+" + channel_reduce_name(reduce);
  switch (norm) {
    case Norm::SecondMoment: s += "+m2"; break;
    case Norm::MaxAbs: s += "+maxabs"; break;
    case Norm::None: s += "+raw"; break;
  }
  return s;
}

Tensor Preprocess::apply(const AttributionMap& map) const {
  Tensor t = reduce_channels(map, reduce).values;
  if (absolute) {
    for (size_t i = 0; i < t.size(); ++i) t[i] = std::fabs(t[i]);
  }
  switch (norm) {
    case Norm::SecondMoment: return normalize_second_moment(t);
    case Norm::MaxAbs: return normalize_max_abs(t);
    case Norm::None: return t;
  }
  return t;
}

Metric metric_from_string(const std::string& s) {
  if (s == "ssim") return Metric::Ssim;
  if (s == "spearman") return Metric::Spearman;
  if (s == "mse_normalized") return Metric::MseNormalized;
  if (s == "mse_raw") return Metric::MseRaw;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::Ssim: return "ssim";
    case Metric::Spearman: return "spearman";
    case Metric::MseNormalized: return "mse_normalized";
    case Metric::MseRaw: return "mse_raw";
  }
  return "?";
}

double metric_identity(Metric m) {
  switch (m) {
    case Metric::Ssim:
    case Metric::Spearman: return 1.0;
    default: return 0.0;
  }
}

MethodSpec make_method(const std::string& name, uint64_t seed) {
  MethodSpec spec;
  spec.name = name;
  if (name == "gradient") {
    spec.fn = [](const ModelGraph& m, const Tensor& x, int t) {
      return gradient(m, x, t);
    };
  } else if (name == "gxi") {
    spec.fn = [](const ModelGraph& m, const Tensor& x, int t) {
      return gradient_x_input(m, x, t);
    };
  } else if (name == "ig") {
    spec.fn = [](const ModelGraph& m, const Tensor& x, int t) {
      return integrated_gradients(m, x, Tensor(x.shape()), 64, t);
    };
  } else if (name == "smoothgrad") {
    spec.fn = [seed](const ModelGraph& m, const Tensor& x, int t) {
      return smoothgrad(m, x, 0.1, 16, t, seed);
    };
  } else if (name == "gb") {
    spec.fn = [](const ModelGraph& m, const Tensor& x, int t) {
      return guided_backprop(m, x, t);
    };
  } else {
    LrpConfig cfg;
    if (name == "lrp0") {
      cfg = LrpConfig::lrp0();
    } else if (name == "lrp_eps") {
      cfg = LrpConfig::lrp_epsilon();
    } else if (name == "lrp_gamma") {
      cfg = LrpConfig::gamma_stack();
    } else if (name == "lrp_beta") {
      cfg = LrpConfig::beta_stack();
    } else if (name == "lrp_ab") {
      cfg = LrpConfig::adaptive_stack();
    } else {
      throw std::invalid_argument("unknown attribution method '" + name + "'");
    }
    spec.fn = [cfg](const ModelGraph& m, const Tensor& x, int t) {
      return lrp(m, x, t, cfg).map;
    };
  }
  return spec;
}

namespace {

double compare_maps(Metric metric, const Tensor& a, const Tensor& b,
                    const SsimOptions& opt) {
  switch (metric) {
    case Metric::Ssim: return ssim(a, b, opt).value;
    case Metric::Spearman: return spearman(a, b).value;
    case Metric::MseNormalized: return mse_normalized(a, b).value;
    case Metric::MseRaw: return mse_raw(a, b).value;
  }
  return kNaN;
}

int target_for(const SanityRunConfig& cfg, const ModelGraph& m,
               const Tensor& x, size_t image_index) {
  if (!cfg.target_predicted) return cfg.data->labels[image_index];
  const Tensor z = forward(m, x).logits(m);
  size_t am = 0;
  for (size_t k = 1; k < z.size(); ++k) {
    if (z[k] > z[am]) am = k;
  }
  return static_cast<int>(am);
}

}  // namespace

SanityResult run_sanity(const SanityRunConfig& cfg) {
  if (!cfg.model || !cfg.data) {
    throw std::invalid_argument("run_sanity: model and data are required");
  }
  if (cfg.methods.empty() || cfg.metrics.empty() || cfg.seeds.empty()) {
    throw std::invalid_argument(
        "run_sanity: need at least one method, metric and seed");
  }
  std::vector<size_t> images = cfg.image_indices;
  if (images.empty()) {
    images.resize(cfg.data->count());
    for (size_t i = 0; i < images.size(); ++i) images[i] = i;
  }
  std::vector<int> stages = cfg.stages;
  if (stages.empty()) {
    RandomizationPlan probe = cfg.plan;
    probe.base_seed = cfg.seeds[0];
    probe.validate(*cfg.model);
    stages.resize(cfg.plan.groups.size());
    for (size_t i = 0; i < stages.size(); ++i) stages[i] = static_cast<int>(i);
  }

  const size_t n_img = images.size();
  const size_t n_m = cfg.methods.size();

  // reference maps from the unrandomized model, computed once
  std::vector<Tensor> x_of(n_img);
  std::vector<int> tgt(n_img);
  for (size_t i = 0; i < n_img; ++i) {
    x_of[i] = cfg.data->image(images[i]);
    tgt[i] = target_for(cfg, *cfg.model, x_of[i], images[i]);
  }
  std::vector<std::vector<Tensor>> ref(n_m, std::vector<Tensor>(n_img));
  std::vector<std::vector<char>> ref_ok(n_m, std::vector<char>(n_img, 0));
#pragma omp parallel for collapse(2) schedule(dynamic)
  for (size_t mi = 0; mi < n_m; ++mi) {
    for (size_t i = 0; i < n_img; ++i) {
      try {
        ref[mi][i] =
            cfg.prep.apply(cfg.methods[mi].fn(*cfg.model, x_of[i], tgt[i]));
        ref_ok[mi][i] = 1;
      } catch (const std::exception&) {
        ref_ok[mi][i] = 0;  // degenerate map; cells flagged downstream
      }
    }
  }

  SanityResult result;
  for (uint64_t seed : cfg.seeds) {
    RandomizationPlan plan = cfg.plan;
    plan.base_seed = seed;
    for (int stage : stages) {
      const ModelGraph randomized =
          randomize(*cfg.model, plan, stage, cfg.cascading);
      // per-method, per-image metric values for this (seed, stage)
      std::vector<std::vector<std::vector<double>>> vals(
          n_m, std::vector<std::vector<double>>(
                   cfg.metrics.size(), std::vector<double>(n_img, kNaN)));
#pragma omp parallel for collapse(2) schedule(dynamic)
      for (size_t mi = 0; mi < n_m; ++mi) {
        for (size_t i = 0; i < n_img; ++i) {
          if (!ref_ok[mi][i]) continue;
          Tensor mapped;
          bool ok = true;
          try {
            mapped =
                cfg.prep.apply(cfg.methods[mi].fn(randomized, x_of[i], tgt[i]));
          } catch (const std::exception&) {
            ok = false;
          }
          for (size_t k = 0; k < cfg.metrics.size(); ++k) {
            if (!ok) continue;
            try {
              vals[mi][k][i] = compare_maps(cfg.metrics[k], ref[mi][i], mapped,
                                            cfg.ssim_opt);
            } catch (const std::exception&) {
              // constant maps make some metrics undefined; keep NaN
            }
          }
        }
      }
      for (size_t mi = 0; mi < n_m; ++mi) {
        for (size_t k = 0; k < cfg.metrics.size(); ++k) {
          std::vector<double> good;
          for (double v : vals[mi][k]) {
            if (!std::isnan(v)) good.push_back(v);
          }
          SanityCell cell;
          cell.method = cfg.methods[mi].name;
          cell.mode = cfg.cascading ? "cascading" : "single";
          cell.stage = stage;
          cell.metric = cfg.metrics[k];
          cell.seed = seed;
          cell.n_images = static_cast<int>(good.size());
          cell.flagged = good.size() != n_img;
          if (good.empty()) {
            cell.mean = kNaN;
            cell.stddev = kNaN;
          } else {
            cell.mean = mean_of(good);
            cell.stddev = std_of(good, cell.mean);
          }
          result.rows.push_back(std::move(cell));
        }
      }
    }
  }
  return result;
}

double SanityResult::mean_over_seeds(const std::string& method, int stage,
                                     Metric metric) const {
  const auto seeds = per_seed(method, stage, metric);
  if (seeds.empty()) return kNaN;
  return mean_of(seeds);
}

std::vector<double> SanityResult::per_seed(const std::string& method,
                                           int stage, Metric metric) const {
  std::vector<double> out;
  for (const auto& c : rows) {
    if (c.method == method && c.stage == stage && c.metric == metric) {
      out.push_back(c.mean);
    }
  }
  return out;
}

void write_sanity_csv(const std::string& path, const SanityResult& result,
                      const std::string& model_name, const Preprocess& prep) {
  CsvWriter csv(path, {"model", "method", "mode", "stage", "metric", "prep",
                       "seed", "n_images", "mean", "std"});
  for (const auto& c : result.rows) {
    csv.row({model_name, c.method, c.mode, std::to_string(c.stage),
             metric_name(c.metric), prep.id(), std::to_string(c.seed),
             std::to_string(c.n_images), csv_double(c.mean),
             csv_double(c.stddev)});
  }
}

LogitCorrelation logit_correlation(const ModelGraph& m,
                                   const RandomizationPlan& plan, int stage,
                                   const Dataset& data,
                                   const std::vector<size_t>& indices,
                                   bool cascading) {
  std::vector<size_t> idx = indices;
  if (idx.empty()) {
    idx.resize(data.count());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }
  const ModelGraph randomized = randomize(m, plan, stage, cascading);
  LogitCorrelation res;
  res.per_image.assign(idx.size(), kNaN);
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < idx.size(); ++i) {
    const Tensor x = data.image(idx[i]);
    const Tensor za = forward(m, x).logits(m);
    const Tensor zb = forward(randomized, x).logits(randomized);
    const double n = static_cast<double>(za.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (size_t k = 0; k < za.size(); ++k) {
      sa += za[k];
      sb += zb[k];
      saa += za[k] * za[k];
      sbb += zb[k] * zb[k];
      sab += za[k] * zb[k];
    }
    const double va = saa / n - (sa / n) * (sa / n);
    const double vb = sbb / n - (sb / n) * (sb / n);
    if (va <= 0.0 || vb <= 0.0) continue;  // constant logits: flagged
    res.per_image[i] = (sab / n - (sa / n) * (sb / n)) / std::sqrt(va * vb);
  }
  std::vector<double> good;
  for (double v : res.per_image) {
    if (!std::isnan(v)) good.push_back(v);
  }
  res.n_valid = static_cast<int>(good.size());
  res.n_flagged = static_cast<int>(idx.size() - good.size());
  if (!good.empty()) {
    res.mean = mean_of(good);
    res.stddev = std_of(good, res.mean);
  } else {
    res.mean = kNaN;
    res.stddev = kNaN;
  }
  return res;
}

namespace {
/// cosine(0,0) = 1 (identical), cosine(0,x!=0) = 0.
double cosine(const Tensor& a, const Tensor& b) {
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 && bb == 0.0) return 1.0;
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}
}  // namespace

SkipStability skip_component_stability(const ModelGraph& m,
                                       const RandomizationPlan& plan,
                                       int stage, const Dataset& data,
                                       const std::vector<size_t>& indices,
                                       const LrpConfig& cfg, bool cascading) {
  std::vector<size_t> idx = indices;
  if (idx.empty()) {
    idx.resize(data.count());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }
  const ModelGraph randomized = randomize(m, plan, stage, cascading);
  std::vector<double> cs(idx.size()), cw(idx.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < idx.size(); ++i) {
    const Tensor x = data.image(idx[i]);
    const int t = data.labels[idx[i]];
    const SkipSplitResult before = skip_split(m, x, t, cfg);
    const SkipSplitResult after = skip_split(randomized, x, t, cfg);
    cs[i] = cosine(before.skip_component.values, after.skip_component.values);
    cw[i] = cosine(before.weighted_component.values,
                   after.weighted_component.values);
  }
  SkipStability out;
  out.cosine_skip = mean_of(cs);
  out.cosine_weighted = mean_of(cw);
  return out;
}

double irrelevance_overlap(const ModelGraph& m, const RandomizationPlan& plan,
                           int stage, const Dataset& data,
                           const std::vector<size_t>& indices,
                           const MethodSpec& method, const Preprocess& prep,
                           double tau, bool cascading) {
  std::vector<size_t> idx = indices;
  if (idx.empty()) {
    idx.resize(data.count());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  }
  const ModelGraph randomized = randomize(m, plan, stage, cascading);
  std::vector<double> overlaps(idx.size(), kNaN);
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < idx.size(); ++i) {
    const Tensor x = data.image(idx[i]);
    const int t = data.labels[idx[i]];
    const Tensor before = prep.apply(method.fn(m, x, t));
    const Tensor after = prep.apply(method.fn(randomized, x, t));
    size_t below_before = 0, still_below = 0;
    for (size_t k = 0; k < before.size(); ++k) {
      if (std::fabs(before[k]) < tau) {
        ++below_before;
        if (std::fabs(after[k]) < tau) ++still_below;
      }
    }
    overlaps[i] = below_before == 0 ? 1.0
                                    : static_cast<double>(still_below) /
                                          static_cast<double>(below_before);
  }
  return mean_of(overlaps);
}

}  // namespace attrib
