#include "attrib/faithfulness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "attrib/csv.hpp"
#include "attrib/kernels.hpp"

namespace attrib {

Tensor blur_image(const Tensor& x, int kernel) {
  if (x.rank() != 3) {
    throw std::invalid_argument("blur_image: expected a (C,H,W) tensor");
  }
  if (kernel < 1 || kernel % 2 == 0) {
    throw std::invalid_argument("blur_image: kernel must be odd and >= 1");
  }
  if (kernel == 1) return x;
  const int c = static_cast<int>(x.shape()[0]);
  const int h = static_cast<int>(x.shape()[1]);
  const int w = static_cast<int>(x.shape()[2]);
  std::vector<double> y(x.size());
  kernels::box_blur(x.data(), c, h, w, kernel, y.data());
  return Tensor(x.shape(), std::move(y));
}

RegionRank rank_regions(const Tensor& map2d, int patch_k) {
  if (map2d.rank() != 2) {
    throw std::invalid_argument(
        "rank_regions: expected a 2-d map, got " + shape_str(map2d.shape()));
  }
  const int h = static_cast<int>(map2d.shape()[0]);
  const int w = static_cast<int>(map2d.shape()[1]);
  if (patch_k < 1 || patch_k > h || patch_k > w) {
    throw std::invalid_argument("rank_regions: patch size " +
                                std::to_string(patch_k) +
                                " exceeds map extent");
  }
  RegionRank rank;
  rank.patch_k = patch_k;
  rank.grid_h = h / patch_k;
  rank.grid_w = w / patch_k;
  rank.excluded_rows = h - rank.grid_h * patch_k;
  rank.excluded_cols = w - rank.grid_w * patch_k;
  std::vector<double> means(static_cast<size_t>(rank.grid_h) * rank.grid_w);
  for (int gr = 0; gr < rank.grid_h; ++gr) {
    for (int gc = 0; gc < rank.grid_w; ++gc) {
      double acc = 0.0;
      for (int r = 0; r < patch_k; ++r) {
        for (int c = 0; c < patch_k; ++c) {
          acc += map2d[(gr * patch_k + r) * static_cast<size_t>(w) +
                       gc * patch_k + c];
        }
      }
      means[gr * rank.grid_w + gc] =
          acc / (static_cast<double>(patch_k) * patch_k);
    }
  }
  rank.order.resize(means.size());
  std::iota(rank.order.begin(), rank.order.end(), 0);
  // descending by mean; stable sort keeps row-major order on ties
  std::stable_sort(rank.order.begin(), rank.order.end(),
                   [&](int a, int b) { return means[a] > means[b]; });
  return rank;
}

namespace {

void paste_region(Tensor& dst, const Tensor& src, const RegionRank& rank,
                  int region) {
  const int c = static_cast<int>(dst.shape()[0]);
  const int h = static_cast<int>(dst.shape()[1]);
  const int w = static_cast<int>(dst.shape()[2]);
  const int gr = region / rank.grid_w, gc = region % rank.grid_w;
  for (int ch = 0; ch < c; ++ch) {
    for (int r = 0; r < rank.patch_k; ++r) {
      const int row = gr * rank.patch_k + r;
      for (int cc = 0; cc < rank.patch_k; ++cc) {
        const int col = gc * rank.patch_k + cc;
        dst[(static_cast<size_t>(ch) * h + row) * w + col] =
            src[(static_cast<size_t>(ch) * h + row) * w + col];
      }
    }
  }
}

double score_of(const ModelGraph& m, const Tensor& x, int target,
                bool softmax_score) {
  const Tensor z = forward(m, x).logits(m);
  if (!softmax_score) return z[target];
  return softmax(z)[target];
}

}  // namespace

OcclusionCurve run_occlusion(const ModelGraph& m, const Tensor& x,
                             const AttributionMap& map,
                             const OcclusionConfig& cfg) {
  const Tensor map2d = reduce_channels(map, ChannelReduce::Sum).values;
  const RegionRank rank = rank_regions(map2d, cfg.patch_k);
  if (cfg.n_steps > static_cast<int>(rank.order.size())) {
    throw std::invalid_argument(
        "run_occlusion: n_steps " + std::to_string(cfg.n_steps) +
        " exceeds region count " + std::to_string(rank.order.size()));
  }
  const Tensor z0 = forward(m, x).logits(m);
  int target = 0;
  for (size_t k = 1; k < z0.size(); ++k) {
    if (z0[k] > z0[target]) target = static_cast<int>(k);
  }
  const Tensor blurred = blur_image(x, cfg.blur_k);

  OcclusionCurve curve;
  curve.target = target;
  curve.method = map.method;
  curve.scores.push_back(score_of(m, x, target, cfg.softmax_score));
  Tensor occluded = x;
  double auc = 0.0;
  for (int step = 0; step < cfg.n_steps; ++step) {
    paste_region(occluded, blurred, rank, rank.order[step]);
    const double s = score_of(m, occluded, target, cfg.softmax_score);
    curve.scores.push_back(s);
    auc += s;
  }
  curve.auc = auc / static_cast<double>(cfg.n_steps);

  // secondary check: attribution mass vs single-region drops
  std::vector<double> region_means(cfg.n_steps), drops(cfg.n_steps);
  for (int i = 0; i < cfg.n_steps; ++i) {
    const int region = rank.order[i];
    const int gr = region / rank.grid_w, gc = region % rank.grid_w;
    double acc = 0.0;
    for (int r = 0; r < cfg.patch_k; ++r) {
      for (int c = 0; c < cfg.patch_k; ++c) {
        acc += map2d[(gr * cfg.patch_k + r) * map2d.shape()[1] +
                     gc * cfg.patch_k + c];
      }
    }
    region_means[i] = acc / (static_cast<double>(cfg.patch_k) * cfg.patch_k);
    Tensor single = x;
    paste_region(single, blurred, rank, region);
    drops[i] =
        curve.scores[0] - score_of(m, single, target, cfg.softmax_score);
  }
  {
    const double n = static_cast<double>(cfg.n_steps);
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < cfg.n_steps; ++i) {
      sa += region_means[i];
      sb += drops[i];
      saa += region_means[i] * region_means[i];
      sbb += drops[i] * drops[i];
      sab += region_means[i] * drops[i];
    }
    const double va = saa / n - (sa / n) * (sa / n);
    const double vb = sbb / n - (sb / n) * (sb / n);
    curve.region_drop_corr =
        (va > 0.0 && vb > 0.0)
            ? (sab / n - (sa / n) * (sb / n)) / std::sqrt(va * vb)
            : 0.0;
  }
  return curve;
}

std::vector<FaithfulnessEntry> faithfulness_suite(
    const std::vector<NamedModel>& models,
    const std::vector<MethodSpec>& methods, const Dataset& data,
    const std::vector<size_t>& indices, const OcclusionConfig& cfg) {
  std::vector<size_t> idx = indices;
  if (idx.empty()) {
    idx.resize(data.count());
    std::iota(idx.begin(), idx.end(), 0);
  }
  std::vector<FaithfulnessEntry> entries(models.size() * methods.size() *
                                         idx.size());
  const size_t n_jobs = entries.size();
#pragma omp parallel for schedule(dynamic)
  for (size_t job = 0; job < n_jobs; ++job) {
    const size_t mi = job / (methods.size() * idx.size());
    const size_t rest = job % (methods.size() * idx.size());
    const size_t me = rest / idx.size();
    const size_t ii = rest % idx.size();
    const ModelGraph& model = *models[mi].model;
    const Tensor x = data.image(idx[ii]);
    const int label = data.labels[idx[ii]];
    FaithfulnessEntry e;
    e.model = models[mi].name;
    e.method = methods[me].name;
    e.image_id = idx[ii];
    const AttributionMap map = methods[me].fn(model, x, label);
    e.curve = run_occlusion(model, x, map, cfg);
    e.curve.image_id = idx[ii];
    entries[job] = std::move(e);
  }
  return entries;
}

void write_curves_csv(const std::string& path,
                      const std::vector<FaithfulnessEntry>& entries,
                      const OcclusionConfig& cfg, uint64_t seed) {
  CsvWriter csv(path, {"model", "method", "patch_k", "blur_k", "seed",
                       "image_id", "step", "score"});
  for (const auto& e : entries) {
    for (size_t step = 0; step < e.curve.scores.size(); ++step) {
      csv.row({e.model, e.method, std::to_string(cfg.patch_k),
               std::to_string(cfg.blur_k), std::to_string(seed),
               std::to_string(e.image_id), std::to_string(step),
               csv_double(e.curve.scores[step])});
    }
  }
}

void write_auc_csv(const std::string& path,
                   const std::vector<FaithfulnessEntry>& entries,
                   const OcclusionConfig& cfg, uint64_t seed) {
  CsvWriter csv(path, {"model", "method", "patch_k", "blur_k", "seed",
                       "image_id", "auc", "region_drop_corr"});
  for (const auto& e : entries) {
    csv.row({e.model, e.method, std::to_string(cfg.patch_k),
             std::to_string(cfg.blur_k), std::to_string(seed),
             std::to_string(e.image_id), csv_double(e.curve.auc),
             csv_double(e.curve.region_drop_corr)});
  }
}

}  // namespace attrib
