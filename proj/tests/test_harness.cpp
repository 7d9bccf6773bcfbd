#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "attrib/faithfulness.hpp"
#include "attrib/rng.hpp"
#include "attrib/sanity.hpp"
#include "attrib/simmetrics.hpp"
#include "attrib/zoo.hpp"
#include "test_util.hpp"

using namespace attrib;
using namespace testutil;

namespace {

uint64_t fnv_bytes(const void* data, size_t n, uint64_t h = 0xCBF29CE484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Input-independent noise generator posing as an attribution method; the
/// draw depends on the model parameters, so each randomization stage sees
/// fresh noise while stage comparisons stay deterministic.
MethodSpec noise_method() {
  MethodSpec spec;
  spec.name = "noise";
  spec.fn = [](const ModelGraph& m, const Tensor& x, int) {
    uint64_t h = fnv_bytes(x.data(), x.size() * sizeof(double));
    for (int id = 0; id < m.node_count(); ++id) {
      const Tensor& w = m.node(id).weights;
      if (!w.empty()) h = fnv_bytes(w.data(), w.size() * sizeof(double), h);
    }
    Rng rng(h);
    Tensor v(x.shape());
    for (size_t i = 0; i < v.size(); ++i) v[i] = rng.normal();
    return AttributionMap{std::move(v), "noise", "logit:0",
                          ChannelReduce::None};
  };
  return spec;
}

MethodSpec constant_method() {
  MethodSpec spec;
  spec.name = "constant";
  spec.fn = [](const ModelGraph&, const Tensor& x, int) {
    Tensor v(x.shape());
    for (size_t i = 0; i < v.size(); ++i) v[i] = 1.0;
    return AttributionMap{std::move(v), "constant", "logit:0",
                          ChannelReduce::None};
  };
  return spec;
}

}  // namespace

TEST_CASE("preprocess pipeline ids and application") {
  Preprocess prep;
  CHECK(prep.id() == "signed+sum+m2");
  prep.absolute = true;
  prep.norm = Preprocess::Norm::MaxAbs;
  CHECK(prep.id() == "abs+sum+maxabs");
  AttributionMap map;
  map.values = Tensor({2, 1, 1}, {3.0, -4.0});
  const Tensor t = prep.apply(map);  // reduce -> -1, abs -> 1, maxabs -> 1
  CHECK(t.size() == 1);
  CHECK(t[0] == 1.0);
}

TEST_CASE("run_sanity") {
  ArchParams p;
  p.arch = Arch::ConvPlain;
  p.height = 16;
  p.width = 16;
  p.conv_channels = 4;
  p.hidden = 16;
  const ModelGraph model = build(p, 321);
  SynthSpec s;
  s.kind = SynthKind::BarShapes;
  s.n = 6;
  s.height = 16;
  s.width = 16;
  const Dataset data = synth_dataset(s, 322);

  SanityRunConfig cfg;
  cfg.model = &model;
  cfg.model_name = "conv_plain";
  cfg.data = &data;
  cfg.methods = {make_method("gradient"), make_method("lrp_gamma")};
  cfg.metrics = {Metric::Ssim, Metric::MseNormalized, Metric::Spearman};
  cfg.plan = default_plan(model, 0);
  cfg.seeds = {11, 12};

  SUBCASE("a stage covering zero parameters is the identity for every metric") {
    cfg.plan.groups = {{}};
    cfg.stages = {0};
    const SanityResult r = run_sanity(cfg);
    for (const auto& cell : r.rows) {
      if (cell.metric == Metric::Ssim || cell.metric == Metric::Spearman) {
        CHECK(cell.mean == doctest::Approx(1.0).epsilon(1e-9));
      } else {
        CHECK(cell.mean == doctest::Approx(0.0).epsilon(1e-9));
      }
      CHECK(cell.n_images == 6);
      CHECK_FALSE(cell.flagged);
    }
  }
  SUBCASE("deterministic: identical configs give identical results") {
    const SanityResult a = run_sanity(cfg);
    const SanityResult b = run_sanity(cfg);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].mean == b.rows[i].mean);
      CHECK(a.rows[i].stddev == b.rows[i].stddev);
    }
  }
  SUBCASE("stage subsets reproduce the full-run rows (reference maps fixed)") {
    SanityRunConfig only0 = cfg;
    only0.stages = {0};
    const SanityResult partial = run_sanity(only0);
    const SanityResult full = run_sanity(cfg);
    for (const auto& cell : partial.rows) {
      bool found = false;
      for (const auto& other : full.rows) {
        if (other.method == cell.method && other.stage == cell.stage &&
            other.metric == cell.metric && other.seed == cell.seed) {
          CHECK(other.mean == cell.mean);
          found = true;
        }
      }
      CHECK(found);
    }
  }
  SUBCASE("constant maps are flagged as missing, not zeros") {
    SanityRunConfig degen = cfg;
    degen.methods = {constant_method()};
    degen.metrics = {Metric::Spearman};
    degen.prep.norm = Preprocess::Norm::None;
    degen.stages = {0};
    const SanityResult r = run_sanity(degen);
    REQUIRE(!r.rows.empty());
    for (const auto& cell : r.rows) {
      CHECK(cell.flagged);
      CHECK(cell.n_images == 0);
      CHECK(std::isnan(cell.mean));
    }
  }
  SUBCASE("noise maps score under the covariance bound (single window)") {
    SanityRunConfig noise = cfg;
    noise.methods = {noise_method()};
    noise.metrics = {Metric::Ssim};
    noise.ssim_opt.single_window = true;
    noise.ssim_opt.c1 = 0.01;
    noise.ssim_opt.c2 = 0.01;
    noise.seeds = {21, 22, 23};
    const SanityResult r = run_sanity(noise);
    double mean = 0;
    int n = 0;
    for (const auto& cell : r.rows) {
      if (cell.stage != 0) continue;
      mean += cell.mean;
      ++n;
    }
    mean /= n;
    // maps are second-moment normalized: var_a + var_b ~ 2
    const double bound = 0.01 / (2.0 + 0.01);
    CHECK(std::fabs(mean) <= bound + 0.02);
  }
  SUBCASE("config validation") {
    SanityRunConfig bad = cfg;
    bad.methods.clear();
    CHECK_THROWS(run_sanity(bad));
    bad = cfg;
    bad.seeds.clear();
    CHECK_THROWS(run_sanity(bad));
  }
}

TEST_CASE("logit correlation") {
  ArchParams p;
  p.arch = Arch::ConvResidual;
  p.height = 16;
  p.width = 16;
  p.conv_channels = 4;
  p.classes = 16;
  const ModelGraph model = build(p, 400);
  SynthSpec s;
  s.n = 8;
  s.height = 16;
  s.width = 16;
  s.classes = 2;
  const Dataset data = synth_dataset(s, 401);
  RandomizationPlan plan = default_plan(model, 555);

  SUBCASE("zero-parameter stage gives r = 1") {
    RandomizationPlan empty = plan;
    empty.groups = {{}};
    const LogitCorrelation r = logit_correlation(model, empty, 0, data, {});
    CHECK(r.n_valid == 8);
    CHECK(r.mean == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant logit vectors are flagged, not averaged") {
    // a model with one logit cannot yield a correlation
    ArchParams p1 = p;
    p1.classes = 1;
    const ModelGraph one = build(p1, 410);
    RandomizationPlan rp = default_plan(one, 411);
    const LogitCorrelation r = logit_correlation(one, rp, 0, data, {0, 1});
    CHECK(r.n_valid == 0);
    CHECK(r.n_flagged == 2);
    CHECK(std::isnan(r.mean));
  }
  SUBCASE("fully randomized mlp head decorrelates") {
    ArchParams pm;
    pm.arch = Arch::MlpSmall;
    pm.height = 16;
    pm.width = 16;
    pm.hidden = 32;
    pm.classes = 16;
    const ModelGraph mlp = build(pm, 402);
    double mean = 0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
      RandomizationPlan rp = default_plan(mlp, derive_seed(601, seed));
      const int last = static_cast<int>(rp.groups.size()) - 1;
      mean += logit_correlation(mlp, rp, last, data, {}).mean;
    }
    CHECK(std::fabs(mean / 5) < 0.3);
  }
}

TEST_CASE("skip component stability") {
  ArchParams p;
  p.arch = Arch::ConvResidual;
  p.height = 16;
  p.width = 16;
  p.conv_channels = 4;
  p.classes = 4;
  const ModelGraph model = build(p, 500);
  SynthSpec s;
  s.n = 4;
  s.height = 16;
  s.width = 16;
  s.classes = 4;
  const Dataset data = synth_dataset(s, 501);
  const LrpConfig cfg = LrpConfig::lrp_epsilon(0.01);

  SUBCASE("zero-parameter stage: both cosines are 1") {
    RandomizationPlan empty;
    empty.groups = {{}};
    empty.base_seed = 1;
    const SkipStability r =
        skip_component_stability(model, empty, 0, data, {}, cfg);
    CHECK(r.cosine_skip == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.cosine_weighted == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("zero-weighted branch in both models: cosine_skip = 1 exactly") {
    // block2.conv2 is zeroed and stays untouched, so the branch output is
    // zero before and after randomizing block2.conv1
    ModelGraph zeroed = model;
    {
      LayerSpec& n = zeroed.mutable_node(zeroed.find_node("block2.conv2"));
      n.weights = Tensor(n.weights.shape());
      n.bias = Tensor(n.bias.shape());
    }
    RandomizationPlan plan;
    plan.base_seed = 77;
    plan.groups = {{zeroed.find_node("block2.conv1")}};
    const SkipStability r =
        skip_component_stability(zeroed, plan, 0, data, {}, cfg);
    CHECK(r.cosine_skip == 1.0);
    CHECK(r.cosine_weighted == 1.0);  // zero-vs-zero convention
  }
  SUBCASE("randomizing the top block hits the weighted path harder") {
    double skip_mean = 0, weighted_mean = 0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
      RandomizationPlan plan = default_plan(model, derive_seed(700, seed));
      const SkipStability r = skip_component_stability(
          model, plan, 1, data, {}, cfg, /*cascading=*/false);
      skip_mean += r.cosine_skip;
      weighted_mean += r.cosine_weighted;
    }
    CHECK(skip_mean / 5 > weighted_mean / 5);
  }
}

TEST_CASE("irrelevance overlap") {
  ArchParams p;
  p.arch = Arch::ConvPlain;
  p.height = 16;
  p.width = 16;
  p.conv_channels = 4;
  p.hidden = 16;
  const ModelGraph model = build(p, 800);
  SynthSpec s;
  s.kind = SynthKind::BarShapes;
  s.n = 6;
  s.height = 16;
  s.width = 16;
  const Dataset data = synth_dataset(s, 801);
  const MethodSpec method = make_method("lrp_gamma");
  const Preprocess prep;

  SUBCASE("zero-parameter stage overlaps fully") {
    RandomizationPlan empty;
    empty.groups = {{}};
    empty.base_seed = 3;
    CHECK(irrelevance_overlap(model, empty, 0, data, {}, method, prep) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("null-feature pixels always land in the overlap") {
    // pixel 2 has zero outgoing weights, so it gets exactly zero relevance
    // before and after any randomization
    Rng rng(850);
    std::vector<double> w1(static_cast<size_t>(6) * 4);
    for (double& v : w1) v = rng.normal();
    for (int o = 0; o < 6; ++o) w1[o * 4 + 2] = 0.0;
    std::vector<LayerSpec> nodes(4);
    nodes[0].kind = LayerKind::Input;
    nodes[0].name = "input";
    nodes[1].kind = LayerKind::Dense;
    nodes[1].name = "fc1";
    nodes[1].inputs = {0};
    nodes[1].fan_in = 4;
    nodes[1].fan_out = 6;
    nodes[1].weights = Tensor({6, 4}, std::move(w1));
    nodes[1].bias = Tensor({6});
    nodes[2].kind = LayerKind::ReLU;
    nodes[2].name = "relu";
    nodes[2].inputs = {1};
    nodes[3].kind = LayerKind::Dense;
    nodes[3].name = "head";
    nodes[3].inputs = {2};
    nodes[3].fan_in = 6;
    nodes[3].fan_out = 2;
    std::vector<double> w2(12);
    for (double& v : w2) v = rng.normal();
    nodes[3].weights = Tensor({2, 6}, std::move(w2));
    nodes[3].bias = Tensor({2});
    const ModelGraph mlp({4}, std::move(nodes));
    Dataset flat;
    flat.images = Tensor({2, 1, 1, 4},
                         {0.2, 0.5, 0.9, 0.7, 0.8, 0.1, 0.3, 0.6});
    flat.labels = {0, 1};
    flat.classes = 2;
    flat.provenance = "synthetic";
    // note: the mlp takes rank-1 inputs; wrap images accordingly
    Dataset wrapped = flat;
    wrapped.images = flat.images.reshaped({2, 4, 1, 1});
    RandomizationPlan plan;
    plan.base_seed = 3;
    plan.groups = {{3}};  // randomize the head
    // tau so small that only the exact-zero pixel qualifies: it must stay
    // in the overlap on both sides
    struct Shim {
      static AttributionMap grad1d(const ModelGraph& m, const Tensor& x,
                                   int t) {
        return gradient(m, x.reshaped({4}), t);
      }
    };
    MethodSpec method{"gradient1d", &Shim::grad1d};
    const double overlap = irrelevance_overlap(mlp, plan, 0, wrapped, {},
                                               method, prep, 1e-9);
    CHECK(overlap == 1.0);
  }
  SUBCASE("head randomization beats a shuffled-map baseline") {
    RandomizationPlan plan = default_plan(model, 900);
    const double overlap =
        irrelevance_overlap(model, plan, 0, data, {}, method, prep, 0.1);
    // permutation baseline: overlap expected for an uninformative pairing
    // is the below-threshold fraction itself
    const ModelGraph randomized = randomize(model, plan, 0);
    double base = 0;
    for (size_t i = 0; i < data.count(); ++i) {
      const Tensor x = data.image(i);
      const Tensor after =
          prep.apply(method.fn(randomized, x, data.labels[i]));
      size_t below = 0;
      for (size_t k = 0; k < after.size(); ++k) {
        if (std::fabs(after[k]) < 0.1) ++below;
      }
      base += static_cast<double>(below) / static_cast<double>(after.size());
    }
    base /= static_cast<double>(data.count());
    CHECK(overlap > base);
  }
}

TEST_CASE("blur_image") {
  SUBCASE("kernel 1 is the identity") {
    const Tensor x = random_input(1, {2, 5, 5});
    CHECK(blur_image(x, 1) == x);
  }
  SUBCASE("constant image keeps its interior") {
    Tensor x({1, 7, 7});
    for (size_t i = 0; i < x.size(); ++i) x[i] = 0.6;
    const Tensor y = blur_image(x, 3);
    for (int r = 1; r < 6; ++r) {
      for (int c = 1; c < 6; ++c) {
        CHECK(y[r * 7 + c] == doctest::Approx(0.6).epsilon(1e-12));
      }
    }
    // zero padding dims the border
    CHECK(y[0] < 0.6);
  }
  SUBCASE("single bright pixel spreads into a value/9 plateau") {
    Tensor x({1, 5, 5});
    x[2 * 5 + 2] = 0.9;
    const Tensor y = blur_image(x, 3);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) {
        const bool in_plateau = std::abs(r - 2) <= 1 && std::abs(c - 2) <= 1;
        CHECK(y[r * 5 + c] ==
              doctest::Approx(in_plateau ? 0.1 : 0.0).epsilon(1e-12));
      }
    }
  }
  SUBCASE("even kernels are rejected") {
    CHECK_THROWS(blur_image(Tensor({1, 4, 4}), 2));
  }
}

TEST_CASE("rank_regions") {
  SUBCASE("uniform map falls back to row-major order") {
    Tensor map({4, 4});
    for (size_t i = 0; i < map.size(); ++i) map[i] = 0.5;
    const RegionRank r = rank_regions(map, 2);
    CHECK(r.order == std::vector<int>{0, 1, 2, 3});
    CHECK(r.excluded_rows == 0);
  }
  SUBCASE("the hot region ranks first") {
    Tensor map({4, 4});
    map[2 * 4 + 3] = 5.0;  // region (1,1)
    const RegionRank r = rank_regions(map, 2);
    CHECK(r.order[0] == 3);
  }
  SUBCASE("first region mean dominates all others (exhaustive)") {
    const Tensor map = random_input(5, {8, 8}, -1, 1);
    const RegionRank r = rank_regions(map, 4);
    std::vector<double> means(4);
    for (int region = 0; region < 4; ++region) {
      const int gr = region / 2, gc = region % 2;
      double acc = 0;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          acc += map[(gr * 4 + a) * 8 + gc * 4 + b];
        }
      }
      means[region] = acc / 16.0;
    }
    for (int region = 0; region < 4; ++region) {
      CHECK(means[r.order[0]] >= means[region]);
    }
  }
  SUBCASE("trailing partial cells are excluded and reported") {
    const RegionRank r = rank_regions(Tensor({7, 10}), 3);
    CHECK(r.grid_h == 2);
    CHECK(r.grid_w == 3);
    CHECK(r.excluded_rows == 1);
    CHECK(r.excluded_cols == 1);
  }
}

TEST_CASE("run_occlusion") {
  SUBCASE("constant model gives a flat curve with auc = s0") {
    // dense layer with zero weights: logits constant in the input
    std::vector<LayerSpec> nodes(3);
    nodes[0].kind = LayerKind::Input;
    nodes[0].name = "input";
    nodes[1].kind = LayerKind::Flatten;
    nodes[1].name = "flatten";
    nodes[1].inputs = {0};
    nodes[2].kind = LayerKind::Dense;
    nodes[2].name = "head";
    nodes[2].inputs = {1};
    nodes[2].fan_in = 64;
    nodes[2].fan_out = 2;
    nodes[2].weights = Tensor({2, 64});
    nodes[2].bias = Tensor({2}, {0.3, -0.2});
    const ModelGraph m({1, 8, 8}, std::move(nodes));
    const Tensor x = random_input(7, {1, 8, 8});
    AttributionMap map;
    map.values = random_input(8, {1, 8, 8}, -1, 1);
    map.method = "noise";
    OcclusionConfig cfg;
    cfg.patch_k = 4;
    cfg.n_steps = 4;
    cfg.blur_k = 3;
    const OcclusionCurve curve = run_occlusion(m, x, map, cfg);
    REQUIRE(curve.scores.size() == 5);
    for (double v : curve.scores) {
      CHECK(v == doctest::Approx(curve.scores[0]).epsilon(1e-12));
    }
    CHECK(curve.auc == doctest::Approx(curve.scores[0]).epsilon(1e-12));
  }
  SUBCASE("a model reading one region drops most when that region goes first") {
    // logit0 sums the pixels of region 0 (top-left 4x4 of 8x8)
    std::vector<LayerSpec> nodes(3);
    nodes[0].kind = LayerKind::Input;
    nodes[0].name = "input";
    nodes[1].kind = LayerKind::Flatten;
    nodes[1].name = "flatten";
    nodes[1].inputs = {0};
    nodes[2].kind = LayerKind::Dense;
    nodes[2].name = "head";
    nodes[2].inputs = {1};
    nodes[2].fan_in = 64;
    nodes[2].fan_out = 2;
    std::vector<double> w(2 * 64, 0.0);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) w[r * 8 + c] = 1.0;
    }
    nodes[2].weights = Tensor({2, 64}, std::move(w));
    nodes[2].bias = Tensor({2});
    const ModelGraph m({1, 8, 8}, std::move(nodes));
    Tensor x = random_input(9, {1, 8, 8}, 0.5, 1.0);
    const AttributionMap map = gradient(m, x, 0);
    OcclusionConfig cfg;
    cfg.patch_k = 4;
    cfg.n_steps = 4;
    cfg.blur_k = 3;
    const OcclusionCurve curve = run_occlusion(m, x, map, cfg);
    // first occluded region must produce the maximal single-step drop
    const double first_drop = curve.scores[0] - curve.scores[1];
    const Tensor blurred = blur_image(x, 3);
    const RegionRank rank = rank_regions(
        reduce_channels(map, ChannelReduce::Sum).values, 4);
    for (int region = 0; region < 4; ++region) {
      Tensor probe = x;
      const int gr = region / rank.grid_w, gc = region % rank.grid_w;
      for (int a = 0; a < 4; ++a) {
        for (int b_ = 0; b_ < 4; ++b_) {
          probe[(gr * 4 + a) * 8 + gc * 4 + b_] =
              blurred[(gr * 4 + a) * 8 + gc * 4 + b_];
        }
      }
      const double drop =
          curve.scores[0] -
          softmax(forward(m, probe).logits(m))[curve.target];
      CHECK(first_drop >= drop - 1e-12);
    }
    // the attribution's own region correlates with the drops
    CHECK(curve.region_drop_corr > 0.5);
  }
  SUBCASE("occlusion is idempotent per region and coverage grows") {
    ArchParams p;
    p.arch = Arch::ConvPlain;
    p.height = 16;
    p.width = 16;
    p.conv_channels = 4;
    p.hidden = 16;
    const ModelGraph m = build(p, 1000);
    const Tensor x = random_input(1001, {1, 16, 16});
    AttributionMap map = gradient(m, x, 0);
    OcclusionConfig cfg;
    cfg.patch_k = 8;
    cfg.n_steps = 4;
    cfg.blur_k = 3;
    const OcclusionCurve curve = run_occlusion(m, x, map, cfg);
    // re-occluding the final image with any already-used region is a no-op
    Tensor occluded = x;
    const Tensor blurred = blur_image(x, cfg.blur_k);
    const RegionRank rank = rank_regions(
        reduce_channels(map, ChannelReduce::Sum).values, cfg.patch_k);
    size_t changed_prev = 0;
    for (int step = 0; step < 4; ++step) {
      const int region = rank.order[step];
      const int gr = region / rank.grid_w, gc = region % rank.grid_w;
      for (int a = 0; a < 8; ++a) {
        for (int b_ = 0; b_ < 8; ++b_) {
          occluded[(gr * 8 + a) * 16 + gc * 8 + b_] =
              blurred[(gr * 8 + a) * 16 + gc * 8 + b_];
        }
      }
      size_t changed = 0;
      for (size_t i = 0; i < x.size(); ++i) {
        if (occluded[i] != x[i]) ++changed;
      }
      CHECK(changed > changed_prev);  // strictly growing coverage
      changed_prev = changed;
    }
    CHECK(curve.scores.size() == 5);
  }
  SUBCASE("too many steps error") {
    ArchParams p;
    p.arch = Arch::MlpSmall;
    p.height = 8;
    p.width = 8;
    const ModelGraph m = build(p, 1);
    const Tensor x = random_input(2, {1, 8, 8});
    AttributionMap map = gradient(m, x, 0);
    OcclusionConfig cfg;
    cfg.patch_k = 4;
    cfg.n_steps = 5;  // only 4 regions
    CHECK_THROWS(run_occlusion(m, x, map, cfg));
  }
}

TEST_CASE("trained bars model: toy faithfulness and phi-relevance orderings") {
  // shared setup: three independently trained conv_plain models at 24x24
  SynthSpec s;
  s.kind = SynthKind::BarShapes;
  s.n = 80;
  s.classes = 2;
  s.height = 24;
  s.width = 24;
  std::vector<size_t> train_idx, eval_idx;
  for (size_t i = 0; i < 64; ++i) train_idx.push_back(i);
  for (size_t i = 64; i < 72; ++i) eval_idx.push_back(i);

  double auc_grad = 0, auc_gb = 0, auc_lrp = 0, auc_noise = 0;
  int lrp_beats_noise = 0;
  double phi_corr_min = 1.0;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    const Dataset data = synth_dataset(s, derive_seed(8801, seed));
    ArchParams p;
    p.arch = Arch::ConvPlain;
    p.height = 24;
    p.width = 24;
    p.conv_channels = 6;
    p.hidden = 16;
    TrainOptions t;
    t.epochs = 15;
    t.lr = 0.1;
    t.seed = derive_seed(8802, seed);
    t.indices = train_idx;
    const ModelGraph m =
        train(build(p, derive_seed(8803, seed)), data, t).model;

    OcclusionConfig occ;
    occ.blur_k = 5;
    occ.patch_k = 4;
    occ.n_steps = 12;
    const auto entries = faithfulness_suite(
        {{"m", &m}},
        {make_method("gradient"), make_method("gb"), make_method("lrp_gamma"),
         noise_method()},
        data, eval_idx, occ);
    double g = 0, gb = 0, lr = 0, nz = 0;
    for (const auto& e : entries) {
      if (e.method == "gradient") g += e.curve.auc;
      if (e.method == "gb") gb += e.curve.auc;
      if (e.method == "lrp_gamma") lr += e.curve.auc;
      if (e.method == "noise") nz += e.curve.auc;
    }
    auc_grad += g;
    auc_gb += gb;
    auc_lrp += lr;
    auc_noise += nz;
    if (lr < nz) ++lrp_beats_noise;

    // background pixels carry near-zero relevance both at phi and at the
    // logits: the |map| patterns co-locate (the signed logit map flips
    // globally when the target logit is negative, so magnitudes compare)
    const int phi_node = m.find_node("pool2");
    const LrpConfig cfg = LrpConfig::gamma_stack();
    double corr = 0;
    for (size_t i : eval_idx) {
      const Tensor x = data.image(i);
      Tensor at_phi = attribute_intermediate(m, x, phi_node, cfg).map.values;
      Tensor at_logit = lrp(m, x, data.labels[i], cfg).map.values;
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      const double n = static_cast<double>(at_phi.size());
      for (size_t k = 0; k < at_phi.size(); ++k) {
        const double a = std::fabs(at_phi[k]), b = std::fabs(at_logit[k]);
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
      }
      corr += (sab / n - (sa / n) * (sb / n)) /
              std::sqrt((saa / n - (sa / n) * (sa / n)) *
                        (sbb / n - (sb / n) * (sb / n)));
    }
    phi_corr_min = std::min(phi_corr_min,
                            corr / static_cast<double>(eval_idx.size()));
  }
  // redistribution methods find occlusion-sensitive regions better than the
  // raw gradient, and far better than input-independent noise
  CHECK(auc_lrp < auc_grad);
  CHECK(auc_gb < auc_grad);
  CHECK(auc_lrp < auc_noise);
  CHECK(lrp_beats_noise >= 2);
  CHECK(phi_corr_min > 0.3);
}

TEST_CASE("faithfulness_suite") {
  ArchParams p;
  p.arch = Arch::ConvPlain;
  p.height = 16;
  p.width = 16;
  p.conv_channels = 4;
  p.hidden = 16;
  const ModelGraph m = build(p, 2000);
  SynthSpec s;
  s.n = 3;
  s.height = 16;
  s.width = 16;
  const Dataset data = synth_dataset(s, 2001);
  OcclusionConfig cfg;
  cfg.patch_k = 4;
  cfg.n_steps = 6;
  cfg.blur_k = 3;

  SUBCASE("one method, one image: a single curve") {
    const auto entries = faithfulness_suite({{"m", &m}},
                                            {make_method("gradient")}, data,
                                            {0}, cfg);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].curve.scores.size() == 7);
    const Tensor x = data.image(0);
    const Tensor z = forward(m, x).logits(m);
    CHECK(entries[0].curve.scores[0] ==
          doctest::Approx(softmax(z)[entries[0].curve.target]).epsilon(1e-12));
  }
  SUBCASE("the same method listed twice yields identical rows") {
    const auto entries = faithfulness_suite(
        {{"m", &m}}, {make_method("gradient"), make_method("gradient")}, data,
        {0, 1}, cfg);
    REQUIRE(entries.size() == 4);
    // entries are (method-major, image-minor)
    for (size_t img = 0; img < 2; ++img) {
      CHECK(entries[img].curve.scores == entries[2 + img].curve.scores);
      CHECK(entries[img].curve.auc == entries[2 + img].curve.auc);
    }
  }
}
