#pragma once

#include <functional>
#include <string>
#include <vector>

#include "attrib/attribution.hpp"
#include "attrib/simmetrics.hpp"
#include "attrib/zoo.hpp"

namespace attrib {

/// Map preprocessing applied before any comparison: optional absolute
/// value, channel reduction, then normalization. The default (signed,
/// channel sum, second moment) keeps the sign information.
struct Preprocess {
  bool absolute = false;
  ChannelReduce reduce = ChannelReduce::Sum;
  enum class Norm { SecondMoment, MaxAbs, None } norm = Norm::SecondMoment;

  std::string id() const;
  /// Throws if the map is degenerate for the chosen normalization.
  Tensor apply(const AttributionMap& map) const;
};

enum class Metric { Ssim, Spearman, MseNormalized, MseRaw };

Metric metric_from_string(const std::string& s);
std::string metric_name(Metric m);
/// Value the metric takes when comparing a map against itself.
double metric_identity(Metric m);

struct MethodSpec {
  std::string name;
  std::function<AttributionMap(const ModelGraph&, const Tensor&, int)> fn;
};

/// Built-in method registry ("gradient", "gxi", "ig", "smoothgrad", "gb",
/// "lrp0", "lrp_eps", "lrp_gamma", "lrp_beta", "lrp_ab").
MethodSpec make_method(const std::string& name, uint64_t seed = 0);

struct SanityRunConfig {
  const ModelGraph* model = nullptr;
  std::string model_name;
  const Dataset* data = nullptr;
  std::vector<size_t> image_indices;
  std::vector<MethodSpec> methods;
  RandomizationPlan plan;  // base_seed ignored; per-run seeds below
  bool cascading = true;
  std::vector<int> stages;  // empty = all plan groups
  std::vector<Metric> metrics;
  std::vector<uint64_t> seeds;
  Preprocess prep;
  SsimOptions ssim_opt;
  /// Attribution target: the sample label (default) or the original
  /// model's predicted class.
  bool target_predicted = false;
};

/// One aggregated cell of the result grid. Degenerate comparisons are
/// recorded as missing (NaN mean), never as zeros; n_images counts the
/// valid ones.
struct SanityCell {
  std::string method;
  std::string mode;
  int stage = 0;
  Metric metric = Metric::Ssim;
  uint64_t seed = 0;
  int n_images = 0;
  double mean = 0.0;
  double stddev = 0.0;
  bool flagged = false;
};

struct SanityResult {
  std::vector<SanityCell> rows;

  /// Mean over seeds of the per-seed means for one (method, stage, metric).
  double mean_over_seeds(const std::string& method, int stage,
                         Metric metric) const;
  /// Per-seed means, ordered as in the config.
  std::vector<double> per_seed(const std::string& method, int stage,
                               Metric metric) const;
};

/// Original-model attributions are computed once and compared against each
/// randomization stage under every metric. Deterministic for a fixed
/// config; images are processed in parallel.
SanityResult run_sanity(const SanityRunConfig& cfg);

void write_sanity_csv(const std::string& path, const SanityResult& result,
                      const std::string& model_name, const Preprocess& prep);

struct LogitCorrelation {
  std::vector<double> per_image;  // NaN where flagged
  double mean = 0.0;
  double stddev = 0.0;
  int n_valid = 0;
  int n_flagged = 0;
};

/// Pearson correlation of the class-logit vector before/after
/// randomization, per image.
LogitCorrelation logit_correlation(const ModelGraph& m,
                                   const RandomizationPlan& plan, int stage,
                                   const Dataset& data,
                                   const std::vector<size_t>& indices,
                                   bool cascading = true);

struct SkipStability {
  double cosine_skip = 0.0;
  double cosine_weighted = 0.0;
};

/// Cosine similarity of the skip/weighted relevance components before and
/// after randomization, averaged over images.
SkipStability skip_component_stability(const ModelGraph& m,
                                       const RandomizationPlan& plan,
                                       int stage, const Dataset& data,
                                       const std::vector<size_t>& indices,
                                       const LrpConfig& cfg,
                                       bool cascading = true);

/// Fraction of pixels below |R| < tau (after preprocessing) in the original
/// model that stay below tau after randomization; 1 when no pixel starts
/// below tau.
double irrelevance_overlap(const ModelGraph& m, const RandomizationPlan& plan,
                           int stage, const Dataset& data,
                           const std::vector<size_t>& indices,
                           const MethodSpec& method, const Preprocess& prep,
                           double tau = 0.1, bool cascading = true);

}  // namespace attrib
