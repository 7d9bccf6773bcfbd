#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "attrib/graph.hpp"

namespace attrib {

enum class ChannelReduce { None, Sum, AbsSum, L2 };

std::string channel_reduce_name(ChannelReduce r);

/// Per-input-element signed relevance scores plus method metadata.
struct AttributionMap {
  Tensor values;
  std::string method;
  std::string target;  // "logit:<k>" or "node:<name>:sum"
  ChannelReduce reduce = ChannelReduce::None;
};

AttributionMap gradient(const ModelGraph& m, const Tensor& x, int target);
AttributionMap gradient_x_input(const ModelGraph& m, const Tensor& x,
                                int target);
AttributionMap integrated_gradients(const ModelGraph& m, const Tensor& x,
                                    const Tensor& baseline, int steps,
                                    int target);
AttributionMap smoothgrad(const ModelGraph& m, const Tensor& x, double sigma,
                          int n_samples, int target, uint64_t seed);
AttributionMap guided_backprop(const ModelGraph& m, const Tensor& x,
                               int target);

/// Collapses the channel axis of a (C,H,W) map; lower-rank maps pass
/// through unchanged. Sum keeps the sign (the default downstream).
AttributionMap reduce_channels(const AttributionMap& map, ChannelReduce mode);

// ---------------------------------------------------------------------------
// LRP

/// One redistribution rule for a parameterized layer.
///   Zero/Epsilon:  R_i = sum_j a_i w_ij / (z_j + eps*sign(z_j)) R_j
///   Gamma:         weights w replaced by w + gamma*max(w,0)
///   Beta:          two-term positive/negative split, (1+beta)/-beta
///   AdaptiveBeta:  per-neuron beta from the negative/positive contribution
///                  ratio, capped
///   ZBox:          input-layer rule with elementwise bounds [low, high]
struct LrpRule {
  enum class Kind { Zero, Epsilon, Gamma, Beta, AdaptiveBeta, ZBox };
  Kind kind = Kind::Zero;
  double eps = 0.0;
  double gamma = 0.0;
  double beta = 1.0;
  double cap = 3.0;
  double low = 0.0, high = 1.0;  // ZBox bounds

  static LrpRule zero() { return {}; }
  static LrpRule epsilon(double e);
  static LrpRule gamma_rule(double g);
  static LrpRule beta_rule(double b);
  static LrpRule adaptive_beta_rule(double cap = 3.0);
  static LrpRule zbox(double low = 0.0, double high = 1.0);
};

struct LrpConfig {
  std::string name = "lrp";
  LrpRule conv = LrpRule::zero();
  LrpRule dense = LrpRule::zero();
  /// Rule for the first parameterized layer; overrides conv/dense there.
  std::optional<LrpRule> first_layer;
  /// Geometric per-conv-layer gamma schedule, bottom -> top.
  bool gamma_decay = false;
  double gamma_bottom = 1.0;
  double gamma_top = 0.01;
  /// Solve the adaptive-beta ratio equation algebraically instead of using
  /// the closed form; under the closed form the cap never binds.
  bool adaptive_beta_algebraic = false;

  // the stacks used throughout the experiments
  static LrpConfig lrp0();
  static LrpConfig lrp_epsilon(double eps = 0.01);
  /// ZBox input layer, gamma-decayed convs, LRP-0 dense layers.
  static LrpConfig gamma_stack(double bottom = 1.0, double top = 0.01);
  /// Beta convs, epsilon dense layers.
  static LrpConfig beta_stack(double beta = 1.0, double eps = 0.01);
  static LrpConfig adaptive_stack(double cap = 3.0, double eps = 0.01);
};

/// Relevance propagation result. layer_sums holds the total relevance per
/// node (graph order) for conservation audits; `absorbed` reports whether
/// any denominator fell below the absorption threshold and swallowed
/// relevance.
struct LrpResult {
  AttributionMap map;
  std::vector<std::string> layer_names;
  std::vector<double> layer_sums;
  bool absorbed = false;
};

/// Relevance is seeded with the selected logit value.
LrpResult lrp(const ModelGraph& m, const Tensor& x, int target,
              const LrpConfig& cfg);

/// Per-neuron beta from raw contributions w_i*x_i; requires
/// sum(+) - sum(-) > 0. All-zero contributions give 0.
double adaptive_beta(const std::vector<double>& contributions, double cap,
                     bool algebraic = false);

/// Explains the sum of activations at a node, propagating through the
/// subgraph below it only.
LrpResult attribute_intermediate(const ModelGraph& m, const Tensor& x,
                                 int node_id, const LrpConfig& cfg);

/// Relevance decomposition at a ResidualAdd: the skip-edge share and the
/// weighted-branch share are propagated to the input separately.
/// total = skip + weighted holds elementwise.
struct SkipSplitResult {
  AttributionMap total;
  AttributionMap skip_component;
  AttributionMap weighted_component;
  int add_node = -1;
};

SkipSplitResult skip_split(const ModelGraph& m, const Tensor& x, int target,
                           const LrpConfig& cfg,
                           std::optional<int> add_node = std::nullopt);

}  // namespace attrib
