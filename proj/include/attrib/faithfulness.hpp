#pragma once

#include <string>
#include <vector>

#include "attrib/attribution.hpp"
#include "attrib/sanity.hpp"
#include "attrib/zoo.hpp"

namespace attrib {

/// Region-perturbation settings: regions form a non-overlapping patch_k
/// grid; occluded regions are replaced from a box-blurred copy of the
/// image. Trailing rows/columns that do not fill a full cell are excluded
/// (and reported).
struct OcclusionConfig {
  int blur_k = 15;
  int patch_k = 8;
  int n_steps = 30;
  bool softmax_score = true;  // false tracks the raw logit
};

/// Per-channel box blur; kernel must be odd (kernel 1 is the identity).
Tensor blur_image(const Tensor& x, int kernel);

struct RegionRank {
  int grid_h = 0, grid_w = 0;
  int patch_k = 0;
  std::vector<int> order;  // region ids (row-major), best first
  int excluded_rows = 0, excluded_cols = 0;
};

/// Ranks grid cells by mean attribution, descending; ties resolve
/// row-major. The map must be 2-d (reduce channels first).
RegionRank rank_regions(const Tensor& map2d, int patch_k);

struct OcclusionCurve {
  std::vector<double> scores;  // s_0 (clean) .. s_n
  double auc = 0.0;            // mean of s_1..s_n
  int target = -1;
  std::string method;
  size_t image_id = 0;
  /// Pearson correlation between region attribution means and
  /// single-region occlusion drops over the evaluated regions.
  double region_drop_corr = 0.0;
};

/// Cumulatively replaces the highest-ranked regions with the blurred copy
/// and re-scores the originally predicted class after each step.
OcclusionCurve run_occlusion(const ModelGraph& m, const Tensor& x,
                             const AttributionMap& map,
                             const OcclusionConfig& cfg);

struct FaithfulnessEntry {
  std::string model;
  std::string method;
  size_t image_id = 0;
  OcclusionCurve curve;
};

struct NamedModel {
  std::string name;
  const ModelGraph* model = nullptr;
};

/// Batch evaluation over models x methods x images. Lower AUC means the
/// attribution found regions whose removal hurts the score more.
std::vector<FaithfulnessEntry> faithfulness_suite(
    const std::vector<NamedModel>& models, const std::vector<MethodSpec>& methods,
    const Dataset& data, const std::vector<size_t>& indices,
    const OcclusionConfig& cfg);

void write_curves_csv(const std::string& path,
                      const std::vector<FaithfulnessEntry>& entries,
                      const OcclusionConfig& cfg, uint64_t seed);
void write_auc_csv(const std::string& path,
                   const std::vector<FaithfulnessEntry>& entries,
                   const OcclusionConfig& cfg, uint64_t seed);

}  // namespace attrib
