#include "attrib/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "attrib/csv.hpp"
#include "attrib/faithfulness.hpp"
#include "attrib/idx.hpp"
#include "attrib/model_io.hpp"
#include "attrib/rng.hpp"
#include "attrib/sanity.hpp"
#include "attrib/theory.hpp"
#include "attrib/zoo.hpp"

namespace attrib {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Configuration problems exit with code 2, before any work is dispatched.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(context + ": unknown key '" + key + "'");
    }
  }
}

struct GlobalArgs {
  std::string command;
  json config;
  fs::path out_dir = ".";
  std::optional<uint64_t> seed_override;
};

GlobalArgs parse_args(const std::vector<std::string>& args) {
  if (args.empty()) {
    throw ConfigError(
        "usage: attrib-audit <train|sanity|faithfulness|theory|stats> "
        "--config PATH [--seed N] [--out DIR] [--threads N]");
  }
  GlobalArgs g;
  g.command = args[0];
  std::optional<std::string> config_path;
  std::optional<int> threads;
  for (size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    const auto need_value = [&]() -> const std::string& {
      if (i + 1 >= args.size()) throw ConfigError("flag " + a + " needs a value");
      return args[++i];
    };
    if (a == "--config") {
      config_path = need_value();
    } else if (a == "--seed") {
      g.seed_override = std::stoull(need_value());
    } else if (a == "--out") {
      g.out_dir = need_value();
    } else if (a == "--threads") {
      threads = std::stoi(need_value());
    } else {
      throw ConfigError("unknown flag '" + a + "'");
    }
  }
  if (!threads) {
    if (const char* env = std::getenv("ATTRIB_AUDIT_THREADS")) {
      threads = std::atoi(env);
    }
  }
#ifdef _OPENMP
  if (threads && *threads > 0) omp_set_num_threads(*threads);
#endif
  if (!config_path) throw ConfigError("--config is required");
  std::ifstream in(*config_path);
  if (!in) throw ConfigError("cannot open config file " + *config_path);
  try {
    in >> g.config;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return g;
}

fs::path out_path(const GlobalArgs& g, const std::string& rel) {
  fs::path p = g.out_dir / rel;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

// ---------------------------------------------------------------------------
// shared config pieces

Dataset dataset_from_json(const json& j, uint64_t fallback_seed) {
  check_keys(j, {"kind", "n", "height", "width", "classes", "channels", "seed",
                 "images", "labels"},
             "dataset");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "idx") {
    const std::string images = j.at("images").get<std::string>();
    const std::string labels = j.at("labels").get<std::string>();
    if (!fs::exists(images)) throw ConfigError("dataset: missing file " + images);
    if (!fs::exists(labels)) throw ConfigError("dataset: missing file " + labels);
    return load_idx(images, labels);
  }
  SynthSpec spec;
  if (kind == "bars") {
    spec.kind = SynthKind::BarShapes;
  } else if (kind == "blobs") {
    spec.kind = SynthKind::Blobs;
  } else {
    throw ConfigError("dataset: unknown kind '" + kind + "'");
  }
  spec.n = j.value("n", 128);
  spec.height = j.value("height", 16);
  spec.width = j.value("width", 16);
  spec.classes = j.value("classes", 2);
  spec.channels = j.value("channels", 1);
  return synth_dataset(spec, j.value("seed", fallback_seed));
}

ArchParams arch_from_json(const json& cfg) {
  ArchParams p;
  p.arch = arch_from_string(cfg.at("arch").get<std::string>());
  if (cfg.contains("arch_params")) {
    const json& a = cfg.at("arch_params");
    check_keys(a,
               {"height", "width", "classes", "hidden", "conv_channels",
                "in_channels"},
               "arch_params");
    p.height = a.value("height", p.height);
    p.width = a.value("width", p.width);
    p.classes = a.value("classes", p.classes);
    p.hidden = a.value("hidden", p.hidden);
    p.conv_channels = a.value("conv_channels", p.conv_channels);
    p.in_channels = a.value("in_channels", p.in_channels);
  }
  return p;
}

struct TrainedModel {
  ModelGraph model;
  std::string name;
  std::vector<EpochLog> log;
};

/// Shared by cmd_train and the inline "train" blocks of other commands.
TrainedModel train_from_json(const json& cfg, uint64_t seed) {
  check_keys(cfg,
             {"arch", "arch_params", "dataset", "train", "seed", "out_model",
              "log_csv"},
             "train config");
  const ArchParams params = arch_from_json(cfg);
  const Dataset data = dataset_from_json(cfg.at("dataset"), seed);
  if (params.arch != Arch::MlpSmall) {
    // dataset geometry must match the conv stack
    const auto shape = data.image_shape();
    if (static_cast<int>(shape[1]) != params.height ||
        static_cast<int>(shape[2]) != params.width) {
      throw ConfigError("train: dataset size does not match arch_params");
    }
  }
  TrainOptions opt;
  opt.seed = derive_seed(seed, 1);
  if (cfg.contains("train")) {
    const json& t = cfg.at("train");
    check_keys(t, {"epochs", "lr", "batch", "limit"}, "train");
    opt.epochs = t.value("epochs", opt.epochs);
    opt.lr = t.value("lr", opt.lr);
    opt.batch_size = t.value("batch", opt.batch_size);
    if (t.contains("limit")) {
      const size_t limit = t.at("limit").get<size_t>();
      for (size_t i = 0; i < std::min(limit, data.count()); ++i) {
        opt.indices.push_back(i);
      }
    }
  }
  TrainedModel out;
  out.name = arch_name(params.arch);
  const ModelGraph base = build(params, derive_seed(seed, 0));
  if (opt.epochs == 0) {
    out.model = base;
  } else {
    TrainResult tr = train(base, data, opt);
    out.model = std::move(tr.model);
    out.log = std::move(tr.log);
  }
  return out;
}

/// Either a "model" file path or an inline "train" block.
TrainedModel model_from_json(const json& cfg, uint64_t seed) {
  if (cfg.contains("model") && cfg.contains("train")) {
    throw ConfigError("give either 'model' or 'train', not both");
  }
  if (cfg.contains("model")) {
    const std::string path = cfg.at("model").get<std::string>();
    if (!fs::exists(path)) throw ConfigError("missing model file " + path);
    TrainedModel out;
    out.model = deserialize(path);
    out.name = fs::path(path).stem().string();
    return out;
  }
  if (!cfg.contains("train")) {
    throw ConfigError("config needs a 'model' path or a 'train' block");
  }
  return train_from_json(cfg.at("train"), seed);
}

std::vector<size_t> images_from_json(const json& cfg, const Dataset& data) {
  std::vector<size_t> idx;
  size_t offset = 0, count = data.count();
  if (cfg.contains("images")) {
    const json& j = cfg.at("images");
    check_keys(j, {"offset", "count"}, "images");
    offset = j.value("offset", 0);
    count = j.value("count", data.count());
  }
  if (offset >= data.count()) throw ConfigError("images: offset out of range");
  count = std::min(count, data.count() - offset);
  for (size_t i = 0; i < count; ++i) idx.push_back(offset + i);
  return idx;
}

std::vector<MethodSpec> methods_from_json(const json& cfg, uint64_t seed) {
  if (!cfg.contains("methods") || !cfg.at("methods").is_array() ||
      cfg.at("methods").empty()) {
    throw ConfigError("config needs a non-empty 'methods' array");
  }
  std::vector<MethodSpec> methods;
  for (const auto& m : cfg.at("methods")) {
    methods.push_back(make_method(m.get<std::string>(), seed));
  }
  return methods;
}

Preprocess prep_from_json(const json& cfg) {
  Preprocess prep;
  if (!cfg.contains("prep")) return prep;
  const json& p = cfg.at("prep");
  check_keys(p, {"absolute", "reduce", "norm"}, "prep");
  prep.absolute = p.value("absolute", false);
  const std::string reduce = p.value("reduce", "sum");
  if (reduce == "sum") {
    prep.reduce = ChannelReduce::Sum;
  } else if (reduce == "abs_sum") {
    prep.reduce = ChannelReduce::AbsSum;
  } else if (reduce == "l2") {
    prep.reduce = ChannelReduce::L2;
  } else if (reduce == "none") {
    prep.reduce = ChannelReduce::None;
  } else {
    throw ConfigError("prep: unknown reduce '" + reduce + "'");
  }
  const std::string norm = p.value("norm", "second_moment");
  if (norm == "second_moment") {
    prep.norm = Preprocess::Norm::SecondMoment;
  } else if (norm == "max_abs") {
    prep.norm = Preprocess::Norm::MaxAbs;
  } else if (norm == "none") {
    prep.norm = Preprocess::Norm::None;
  } else {
    throw ConfigError("prep: unknown norm '" + norm + "'");
  }
  return prep;
}

// ---------------------------------------------------------------------------
// commands

int cmd_train(const GlobalArgs& g) {
  const json& cfg = g.config;
  check_keys(cfg,
             {"arch", "arch_params", "dataset", "train", "seed", "out_model",
              "log_csv"},
             "config");
  const uint64_t seed = g.seed_override.value_or(cfg.value("seed", 0));
  TrainedModel tm = train_from_json(cfg, seed);
  const std::string model_file = cfg.value("out_model", "model.bin");
  serialize(tm.model, out_path(g, model_file).string());
  const std::string log_file = cfg.value("log_csv", "train_log.csv");
  CsvWriter csv(out_path(g, log_file).string(), {"epoch", "loss", "accuracy"});
  for (const auto& e : tm.log) {
    csv.row({std::to_string(e.epoch), csv_double(e.loss),
             csv_double(e.accuracy)});
  }
  return 0;
}

int cmd_sanity(const GlobalArgs& g) {
  const json& cfg = g.config;
  check_keys(cfg,
             {"model", "train", "dataset", "images", "methods", "metrics",
              "mode", "stages", "seeds", "prep", "ssim", "target", "seed",
              "out_csv"},
             "config");
  const uint64_t seed = g.seed_override.value_or(cfg.value("seed", 0));
  TrainedModel tm = model_from_json(cfg, seed);
  const Dataset data = dataset_from_json(cfg.at("dataset"), seed);

  SanityRunConfig run;
  run.model = &tm.model;
  run.model_name = tm.name;
  run.data = &data;
  run.image_indices = images_from_json(cfg, data);
  run.methods = methods_from_json(cfg, seed);
  if (!cfg.contains("metrics") || cfg.at("metrics").empty()) {
    throw ConfigError("config needs a non-empty 'metrics' array");
  }
  for (const auto& m : cfg.at("metrics")) {
    run.metrics.push_back(metric_from_string(m.get<std::string>()));
  }
  run.plan = default_plan(tm.model, seed);
  run.cascading = cfg.value("mode", "cascading") == "cascading";
  if (cfg.contains("stages")) {
    run.stages = cfg.at("stages").get<std::vector<int>>();
    if (run.stages.empty()) throw ConfigError("'stages' must not be empty");
  }
  if (cfg.contains("seeds")) {
    run.seeds = cfg.at("seeds").get<std::vector<uint64_t>>();
  }
  if (run.seeds.empty()) run.seeds = {derive_seed(seed, 2)};
  run.prep = prep_from_json(cfg);
  if (cfg.contains("ssim")) {
    const json& s = cfg.at("ssim");
    check_keys(s, {"window", "stride", "c1", "c2", "single_window"}, "ssim");
    run.ssim_opt.window = s.value("window", run.ssim_opt.window);
    run.ssim_opt.stride = s.value("stride", run.ssim_opt.stride);
    run.ssim_opt.c1 = s.value("c1", run.ssim_opt.c1);
    run.ssim_opt.c2 = s.value("c2", run.ssim_opt.c2);
    run.ssim_opt.single_window =
        s.value("single_window", run.ssim_opt.single_window);
  }
  run.target_predicted = cfg.value("target", "label") == "predicted";

  const SanityResult result = run_sanity(run);
  write_sanity_csv(out_path(g, cfg.value("out_csv", "sanity.csv")).string(),
                   result, run.model_name, run.prep);
  int failures = 0;
  for (const auto& row : result.rows) {
    if (row.n_images == 0) {
      std::cerr << "sanity: no valid images for method=" << row.method
                << " stage=" << row.stage
                << " metric=" << metric_name(row.metric)
                << " seed=" << row.seed << "\n";
      ++failures;
    }
  }
  return failures ? 1 : 0;
}

int cmd_faithfulness(const GlobalArgs& g) {
  const json& cfg = g.config;
  check_keys(cfg,
             {"model", "models", "train", "dataset", "images", "methods",
              "occlusion", "seed", "out_curves", "out_auc"},
             "config");
  const uint64_t seed = g.seed_override.value_or(cfg.value("seed", 0));
  std::vector<TrainedModel> owned;
  if (cfg.contains("models")) {
    for (const auto& p : cfg.at("models")) {
      const std::string path = p.get<std::string>();
      if (!fs::exists(path)) throw ConfigError("missing model file " + path);
      TrainedModel tm;
      tm.model = deserialize(path);
      tm.name = fs::path(path).stem().string();
      owned.push_back(std::move(tm));
    }
  } else {
    owned.push_back(model_from_json(cfg, seed));
  }
  const Dataset data = dataset_from_json(cfg.at("dataset"), seed);
  const std::vector<size_t> indices = images_from_json(cfg, data);
  const std::vector<MethodSpec> methods = methods_from_json(cfg, seed);

  OcclusionConfig occ;
  if (cfg.contains("occlusion")) {
    const json& o = cfg.at("occlusion");
    check_keys(o, {"blur_k", "patch_k", "steps", "score"}, "occlusion");
    occ.blur_k = o.value("blur_k", occ.blur_k);
    occ.patch_k = o.value("patch_k", occ.patch_k);
    occ.n_steps = o.value("steps", occ.n_steps);
    occ.softmax_score = o.value("score", "softmax") == "softmax";
  }

  std::vector<NamedModel> models;
  for (const auto& tm : owned) models.push_back({tm.name, &tm.model});
  const auto entries =
      faithfulness_suite(models, methods, data, indices, occ);
  write_curves_csv(out_path(g, cfg.value("out_curves", "curves.csv")).string(),
                   entries, occ, seed);
  write_auc_csv(out_path(g, cfg.value("out_auc", "auc.csv")).string(), entries,
                occ, seed);
  return 0;
}

int cmd_theory(const GlobalArgs& g) {
  const json& cfg = g.config;
  check_keys(cfg,
             {"experiments", "ssim_noise", "spearman_noise", "mse", "overtaking",
              "monotonicity", "dominance", "seed", "out_csv"},
             "config");
  const uint64_t seed = g.seed_override.value_or(cfg.value("seed", 0));
  std::vector<std::string> experiments =
      cfg.value("experiments", std::vector<std::string>{
                                   "ssim_noise", "spearman_noise", "mse", "overtaking",
                                   "monotonicity", "dominance"});
  CsvWriter csv(out_path(g, cfg.value("out_csv", "theory.csv")).string(),
                {"experiment", "param_json", "seed", "trials", "value",
                 "analytic", "bound"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  int failures = 0;
  const auto emit = [&](const std::string& name, const json& params,
                        uint64_t trials, double value, double analytic,
                        double bound) {
    csv.row({name, params.dump(), std::to_string(seed),
             std::to_string(trials), csv_double(value), csv_double(analytic),
             csv_double(bound)});
  };

  for (const std::string& exp : experiments) {
    try {
      if (exp == "ssim_noise") {
        json p = cfg.value("ssim_noise", json::object());
        check_keys(p, {"patch", "trials", "c1", "c2", "distribution"}, "ssim_noise");
        const int patch = p.value("patch", 16);
        const int trials = p.value("trials", 1000);
        const double c1 = p.value("c1", 0.01), c2 = p.value("c2", 0.01);
        const MapDistribution dist =
            p.value("distribution", "normal") == "uniform"
                ? MapDistribution::Uniform
                : MapDistribution::Normal;
        const SsimNoiseResult r =
            ssim_noise_mc(patch, trials, c1, c2, derive_seed(seed, 11), dist);
        emit("ssim_noise", p, trials, r.abs_mean_ssim, 0.0, r.bound);
        emit("ssim_noise_mean_abs", p, trials, r.mean_abs_ssim, nan, nan);
        emit("ssim_noise_control", p, trials, r.control_ssim, 1.0, nan);
      } else if (exp == "spearman_noise") {
        json p = cfg.value("spearman_noise", json::object());
        check_keys(p, {"n", "trials"}, "spearman_noise");
        const size_t n = p.value("n", 1024);
        const int trials = p.value("trials", 200);
        const SpearmanNoiseResult r = spearman_noise_mc(n, trials, derive_seed(seed, 13));
        emit("spearman_noise", p, trials, r.mean_spearman, 0.0, nan);
        emit("spearman_noise_control", p, trials, r.control_mean, nan, nan);
      } else if (exp == "mse") {
        json p = cfg.value("mse", json::object());
        check_keys(p, {"n", "trials"}, "mse");
        const size_t n = p.value("n", 10000);
        const int trials = p.value("trials", 200);
        const MseMcResult r = mse_mc(n, trials, derive_seed(seed, 17));
        emit("mse_normalized", p, trials, r.mean, 2.0, 2.0);
        emit("mse_identical", p, trials, r.identical, 0.0, nan);
        emit("mse_negated", p, trials, r.negated, 4.0, nan);
      } else if (exp == "overtaking") {
        json p = cfg.value("overtaking", json::object());
        check_keys(p, {"splits", "trials"}, "overtaking");
        const uint64_t trials = p.value("trials", 1000000);
        json splits = p.value("splits", json::array());
        if (splits.empty()) {
          splits = json::array(
              {{{"small", {1, 1, 1, 1}}, {"large", {2}}},
               {{"small", {1, 1, 1, 1}}, {"large", {4}}},
               {{"small", std::vector<int>(16, 1)}, {"large", {4, 4, 4, 4}}}});
        }
        int k = 0;
        for (const auto& sj : splits) {
          check_keys(sj, {"small", "large"}, "overtaking split");
          ActivationSplit split;
          split.small = sj.at("small").get<std::vector<double>>();
          split.large = sj.at("large").get<std::vector<double>>();
          const OvertakingResult r = overtaking_probability_mc(
              split, trials, derive_seed(seed, 19 + 2 * k));
          emit("overtaking", sj, trials, r.empirical, r.exact, r.bound);
          emit("overtaking_uncond", sj, trials, r.empirical_unconditional,
               r.exact / 2.0, nan);
          const OvertakingResult ra = overtaking_probability_avg(
              split, trials, derive_seed(seed, 20 + 2 * k));
          emit("overtaking_avg", sj, trials, ra.empirical, ra.exact, ra.bound);
          ++k;
        }
      } else if (exp == "monotonicity") {
        json p = cfg.value("monotonicity", json::object());
        check_keys(p, {"methods", "instances"}, "monotonicity");
        const int instances = p.value("instances", 1000);
        const std::vector<std::string> names = p.value(
            "methods", std::vector<std::string>{"gi", "lrp_beta", "shapley"});
        for (const auto& nm : names) {
          MonotoneMethod mm;
          if (nm == "gi") {
            mm = MonotoneMethod::GradientXInput;
          } else if (nm == "lrp_beta") {
            mm = MonotoneMethod::LrpBeta;
          } else if (nm == "shapley") {
            mm = MonotoneMethod::ShapleyExact;
          } else {
            throw ConfigError("monotonicity: unknown method '" + nm + "'");
          }
          const MonotonicityResult r =
              monotonicity_test(mm, instances, derive_seed(seed, 23));
          json pj = p;
          pj["method"] = nm;
          emit("monotonicity", pj, instances, r.violations, 0.0, 0.0);
        }
      } else if (exp == "dominance") {
        json p = cfg.value("dominance", json::object());
        check_keys(p, {"nets", "inputs", "hidden"}, "dominance");
        const int nets = p.value("nets", 50);
        const int inputs = p.value("inputs", 12);
        const int hidden = p.value("hidden", 16);
        double worst = 0.0;
        int non_positive = 0;
        int done = 0;
        uint64_t attempt = 0;
        while (done < nets) {
          // random bias-free ReLU MLP with a positive target logit
          ArchParams ap;
          ap.arch = Arch::MlpSmall;
          ap.in_channels = 1;
          ap.height = 1;
          ap.width = inputs;
          ap.hidden = hidden;
          ap.classes = 3;
          const ModelGraph net = build(ap, derive_seed(seed, 31 + attempt));
          Rng rng(derive_seed(seed, 41 + attempt));
          ++attempt;
          Tensor x({1, 1, static_cast<size_t>(inputs)});
          for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform01();
          const Tensor z = forward(net, x).logits(net);
          int target = -1;
          for (size_t c = 0; c < z.size(); ++c) {
            if (z[c] > 0.0) target = static_cast<int>(c);
          }
          if (target < 0) continue;
          const DominanceResult r =
              positive_dominance_check(net, x, target, LrpConfig::lrp0());
          worst = std::max(worst, r.max_rel_err);
          if (!r.all_positive) ++non_positive;
          ++done;
        }
        emit("dominance_max_rel_err", p, nets, worst, 0.0, 1e-6);
        emit("dominance_nonpositive_layers", p, nets, non_positive, 0.0, 0.0);
      } else {
        throw ConfigError("unknown experiment '" + exp + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      std::cerr << "theory: experiment '" << exp << "' failed: " << e.what()
                << "\n";
      ++failures;
    }
  }
  return failures ? 1 : 0;
}

int cmd_stats(const GlobalArgs& g) {
  const json& cfg = g.config;
  check_keys(cfg,
             {"model", "train", "dataset", "images", "seed", "out_quantiles",
              "out_nonpositive", "out_overtaking"},
             "config");
  const uint64_t seed = g.seed_override.value_or(cfg.value("seed", 0));
  TrainedModel tm = model_from_json(cfg, seed);
  const Dataset data = dataset_from_json(cfg.at("dataset"), seed);
  const std::vector<size_t> indices = images_from_json(cfg, data);

  const QuantileTable table = activation_stats(tm.model, data, indices);
  const auto qs = QuantileTable::quantiles();
  {
    CsvWriter csv(
        out_path(g, cfg.value("out_quantiles", "quantiles.csv")).string(),
        {"model", "layer", "q", "value", "n_images"});
    for (size_t l = 0; l < table.layer_names.size(); ++l) {
      for (int k = 0; k < QuantileTable::kNumQ; ++k) {
        csv.row({tm.name, table.layer_names[l], csv_double(qs[k]),
                 csv_double(table.values[l][k]),
                 std::to_string(table.n_images)});
      }
    }
  }
  {
    CsvWriter csv(
        out_path(g, cfg.value("out_nonpositive", "nonpositive.csv")).string(),
        {"model", "layer", "frac_nonpositive", "n_images"});
    for (size_t l = 0; l < table.layer_names.size(); ++l) {
      csv.row({tm.name, table.layer_names[l],
               csv_double(table.nonpositive_fraction[l]),
               std::to_string(table.n_images)});
    }
  }
  {
    CsvWriter csv(
        out_path(g, cfg.value("out_overtaking", "overtaking.csv")).string(),
        {"model", "layer", "q_h", "q_l", "K", "gamma", "P"});
    for (const auto& cell : quantile_overtaking(table)) {
      csv.row({tm.name, cell.layer, csv_double(cell.q_h), csv_double(cell.q_l),
               csv_double(cell.K), csv_double(cell.gamma),
               csv_double(cell.p)});
    }
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  try {
    const GlobalArgs g = parse_args(args);
    if (g.command == "train") return cmd_train(g);
    if (g.command == "sanity") return cmd_sanity(g);
    if (g.command == "faithfulness") return cmd_faithfulness(g);
    if (g.command == "theory") return cmd_theory(g);
    if (g.command == "stats") return cmd_stats(g);
    throw ConfigError("unknown command '" + g.command + "'");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace attrib
