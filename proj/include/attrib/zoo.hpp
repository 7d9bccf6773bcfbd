#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attrib/graph.hpp"

namespace attrib {

enum class Arch { MlpSmall, ConvPlain, ConvResidual };

Arch arch_from_string(const std::string& s);
std::string arch_name(Arch a);

struct ArchParams {
  Arch arch = Arch::MlpSmall;
  int in_channels = 1;
  int height = 16;
  int width = 16;
  int classes = 2;
  int hidden = 32;         // dense width (mlp hidden / conv head)
  int conv_channels = 8;   // base conv width
};

/// Deterministic per seed. Weights are zero-mean normal with variance
/// 2/fan_in, biases start at zero.
ModelGraph build(const ArchParams& p, uint64_t seed);

/// Image batch with labels. Values live in [0,1].
struct Dataset {
  Tensor images;  // (N,C,H,W)
  std::vector<int> labels;
  int classes = 0;
  std::string provenance;  // "synthetic" | "idx-file"

  size_t count() const { return labels.size(); }
  std::vector<size_t> image_shape() const;  // (C,H,W)
  Tensor image(size_t i) const;

  void validate() const;
};

enum class SynthKind { Blobs, BarShapes };

struct SynthSpec {
  SynthKind kind = SynthKind::BarShapes;
  size_t n = 0;
  int classes = 2;
  int channels = 1;
  int height = 16;
  int width = 16;
};

/// Deterministic synthetic data. Blobs: class-specific bright blob on a
/// dim background, linearly separable. BarShapes: an oriented bar (class =
/// orientation) over a speckle-textured background, so flat texture
/// regions carry no class signal.
Dataset synth_dataset(const SynthSpec& spec, uint64_t seed);

/// Ordered top-down parameter groups plus the He-style re-init policy.
/// Groups must be disjoint and strictly ordered from output to input.
struct RandomizationPlan {
  std::vector<std::vector<int>> groups;  // node ids, group 0 = top
  uint64_t base_seed = 0;

  void validate(const ModelGraph& m) const;
};

/// Default grouping: dense head first, then one group per conv stage,
/// top-down.
RandomizationPlan default_plan(const ModelGraph& m, uint64_t base_seed);

/// Returns a copy with groups 0..stage (cascading) or just group `stage`
/// (single mode) re-initialized; untouched parameters are bit-identical.
ModelGraph randomize(const ModelGraph& m, const RandomizationPlan& plan,
                     int stage, bool cascading = true);

struct TrainOptions {
  int epochs = 10;
  double lr = 0.05;
  uint64_t seed = 0;
  int batch_size = 16;
  std::vector<size_t> indices;  // subset; empty = whole dataset
};

struct EpochLog {
  int epoch;
  double loss;
  double accuracy;
};

struct TrainResult {
  ModelGraph model;
  std::vector<EpochLog> log;
};

/// Plain SGD on softmax cross-entropy. Deterministic per seed; throws on a
/// non-finite loss.
TrainResult train(const ModelGraph& m, const Dataset& data,
                  const TrainOptions& opt);

inline TrainResult train(const ModelGraph& m, const Dataset& data, int epochs,
                         double lr, uint64_t seed) {
  TrainOptions opt;
  opt.epochs = epochs;
  opt.lr = lr;
  opt.seed = seed;
  return train(m, data, opt);
}

double accuracy(const ModelGraph& m, const Dataset& data,
                const std::vector<size_t>& indices = {});

}  // namespace attrib
