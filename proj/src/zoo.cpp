#include "attrib/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "attrib/rng.hpp"

namespace attrib {

Arch arch_from_string(const std::string& s) {
  if (s == "mlp_small") return Arch::MlpSmall;
  if (s == "conv_plain") return Arch::ConvPlain;
  if (s == "conv_residual") return Arch::ConvResidual;
  throw std::invalid_argument("unknown architecture '" + s + "'");
}

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::MlpSmall: return "mlp_small";
    case Arch::ConvPlain: return "conv_plain";
    case Arch::ConvResidual: return "conv_residual";
  }
  return "?";
}

namespace {

LayerSpec input_node() {
  LayerSpec n;
  n.kind = LayerKind::Input;
  n.name = "input";
  return n;
}

LayerSpec dense_node(const std::string& name, int from, int fan_in,
                     int fan_out) {
  LayerSpec n;
  n.kind = LayerKind::Dense;
  n.name = name;
  n.inputs = {from};
  n.fan_in = fan_in;
  n.fan_out = fan_out;
  n.weights = Tensor({static_cast<size_t>(fan_out), static_cast<size_t>(fan_in)});
  n.bias = Tensor({static_cast<size_t>(fan_out)});
  return n;
}

LayerSpec conv_node(const std::string& name, int from, int in_c, int out_c,
                    int k, int stride, int pad) {
  LayerSpec n;
  n.kind = LayerKind::Conv2D;
  n.name = name;
  n.inputs = {from};
  n.in_channels = in_c;
  n.out_channels = out_c;
  n.kernel = k;
  n.stride = stride;
  n.pad = pad;
  n.weights = Tensor({static_cast<size_t>(out_c), static_cast<size_t>(in_c),
                      static_cast<size_t>(k), static_cast<size_t>(k)});
  n.bias = Tensor({static_cast<size_t>(out_c)});
  return n;
}

LayerSpec simple_node(LayerKind kind, const std::string& name, int from,
                      int kernel = 0) {
  LayerSpec n;
  n.kind = kind;
  n.name = name;
  n.inputs = {from};
  n.kernel = kernel;
  return n;
}

void init_params(ModelGraph& m, uint64_t seed) {
  for (int id = 0; id < m.node_count(); ++id) {
    LayerSpec& n = m.mutable_node(id);
    if (!n.has_weights()) continue;
    Rng rng(derive_seed(seed, static_cast<uint64_t>(id)));
    const double sd = std::sqrt(2.0 / n.init_fan_in());
    for (size_t i = 0; i < n.weights.size(); ++i) n.weights[i] = rng.normal() * sd;
    for (size_t i = 0; i < n.bias.size(); ++i) n.bias[i] = 0.0;
  }
}

}  // namespace

ModelGraph build(const ArchParams& p, uint64_t seed) {
  if (p.classes < 1 || p.hidden < 1 || p.conv_channels < 1 ||
      p.in_channels < 1 || p.height < 1 || p.width < 1) {
    throw std::invalid_argument("build: invalid architecture parameters");
  }
  std::vector<LayerSpec> nodes;
  nodes.push_back(input_node());
  const std::vector<size_t> in_shape = {static_cast<size_t>(p.in_channels),
                                        static_cast<size_t>(p.height),
                                        static_cast<size_t>(p.width)};
  const int in_flat = p.in_channels * p.height * p.width;

  switch (p.arch) {
    case Arch::MlpSmall: {
      nodes.push_back(simple_node(LayerKind::Flatten, "flatten", 0));
      nodes.push_back(dense_node("fc1", 1, in_flat, p.hidden));
      nodes.push_back(simple_node(LayerKind::ReLU, "fc1.relu", 2));
      nodes.push_back(dense_node("head", 3, p.hidden, p.classes));
      break;
    }
    case Arch::ConvPlain: {
      if (p.height % 8 != 0 || p.width % 8 != 0) {
        throw std::invalid_argument(
            "conv_plain needs height/width divisible by 8");
      }
      const int c = p.conv_channels;
      const int c2 = c + c / 2, c3 = 2 * c;
      int prev = 0;
      auto stage = [&](const std::string& nm, int in_c, int out_c) {
        nodes.push_back(conv_node(nm, prev, in_c, out_c, 3, 1, 1));
        prev = static_cast<int>(nodes.size()) - 1;
        nodes.push_back(simple_node(LayerKind::ReLU, nm + ".relu", prev));
        prev = static_cast<int>(nodes.size()) - 1;
      };
      stage("conv1", p.in_channels, c);
      nodes.push_back(simple_node(LayerKind::AvgPool, "pool1", prev, 2));
      prev = static_cast<int>(nodes.size()) - 1;
      stage("conv2", c, c2);
      nodes.push_back(simple_node(LayerKind::AvgPool, "pool2", prev, 2));
      prev = static_cast<int>(nodes.size()) - 1;
      stage("conv3", c2, c3);
      nodes.push_back(simple_node(LayerKind::AvgPool, "pool3", prev, 2));
      prev = static_cast<int>(nodes.size()) - 1;
      stage("conv4", c3, c3);
      nodes.push_back(simple_node(LayerKind::Flatten, "flatten", prev));
      prev = static_cast<int>(nodes.size()) - 1;
      const int flat = c3 * (p.height / 8) * (p.width / 8);
      nodes.push_back(dense_node("fc1", prev, flat, p.hidden));
      prev = static_cast<int>(nodes.size()) - 1;
      nodes.push_back(simple_node(LayerKind::ReLU, "fc1.relu", prev));
      prev = static_cast<int>(nodes.size()) - 1;
      nodes.push_back(dense_node("head", prev, p.hidden, p.classes));
      break;
    }
    case Arch::ConvResidual: {
      if (p.height % 8 != 0 || p.width % 8 != 0) {
        throw std::invalid_argument(
            "conv_residual needs height/width divisible by 8");
      }
      const int c = p.conv_channels;
      nodes.push_back(conv_node("stem", 0, p.in_channels, c, 3, 1, 1));
      nodes.push_back(simple_node(LayerKind::ReLU, "stem.relu", 1));
      nodes.push_back(simple_node(LayerKind::AvgPool, "pool1", 2, 2));
      int prev = 3;
      for (int b = 1; b <= 2; ++b) {
        const std::string bn = "block" + std::to_string(b);
        const int fork = prev;
        nodes.push_back(conv_node(bn + ".conv1", fork, c, c, 3, 1, 1));
        nodes.push_back(simple_node(LayerKind::ReLU, bn + ".relu1",
                                    static_cast<int>(nodes.size()) - 1));
        nodes.push_back(conv_node(bn + ".conv2",
                                  static_cast<int>(nodes.size()) - 1, c, c, 3,
                                  1, 1));
        LayerSpec add;
        add.kind = LayerKind::ResidualAdd;
        add.name = bn + ".add";
        add.inputs = {fork, static_cast<int>(nodes.size()) - 1};
        nodes.push_back(add);
        nodes.push_back(simple_node(LayerKind::ReLU, bn + ".relu2",
                                    static_cast<int>(nodes.size()) - 1));
        nodes.push_back(simple_node(LayerKind::AvgPool,
                                    "pool" + std::to_string(b + 1),
                                    static_cast<int>(nodes.size()) - 1, 2));
        prev = static_cast<int>(nodes.size()) - 1;
      }
      nodes.push_back(simple_node(LayerKind::Flatten, "flatten", prev));
      const int flat = c * (p.height / 8) * (p.width / 8);
      nodes.push_back(dense_node("head", static_cast<int>(nodes.size()) - 1,
                                 flat, p.classes));
      break;
    }
  }

  ModelGraph m(in_shape, std::move(nodes));
  init_params(m, seed);
  return m;
}

std::vector<size_t> Dataset::image_shape() const {
  const auto& s = images.shape();
  if (s.size() != 4) throw std::logic_error("Dataset: images must be 4-d");
  return {s[1], s[2], s[3]};
}

Tensor Dataset::image(size_t i) const {
  const auto s = image_shape();
  const size_t n = shape_size(s);
  std::vector<double> v(images.data() + i * n, images.data() + (i + 1) * n);
  return Tensor(s, std::move(v));
}

void Dataset::validate() const {
  const auto& s = images.shape();
  if (s.size() != 4) throw std::invalid_argument("Dataset: images must be 4-d");
  if (s[0] != labels.size()) {
    throw std::invalid_argument("Dataset: image/label count mismatch (" +
                                std::to_string(s[0]) + " images, " +
                                std::to_string(labels.size()) + " labels)");
  }
  for (int l : labels) {
    if (l < 0 || l >= classes) {
      throw std::invalid_argument("Dataset: label " + std::to_string(l) +
                                  " outside class count " +
                                  std::to_string(classes));
    }
  }
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i] < 0.0 || images[i] > 1.0) {
      throw std::invalid_argument("Dataset: pixel value outside [0,1]");
    }
  }
}

Dataset synth_dataset(const SynthSpec& spec, uint64_t seed) {
  if (spec.n == 0) throw std::invalid_argument("synth_dataset: n must be > 0");
  if (spec.classes < 2) {
    throw std::invalid_argument("synth_dataset: need at least 2 classes");
  }
  const int C = spec.channels, H = spec.height, W = spec.width;
  Tensor images({spec.n, static_cast<size_t>(C), static_cast<size_t>(H),
                 static_cast<size_t>(W)});
  std::vector<int> labels(spec.n);
  Rng rng(derive_seed(seed, 0xDA7A));

  for (size_t i = 0; i < spec.n; ++i) {
    const int cls = static_cast<int>(i % spec.classes);  // balanced +-1
    labels[i] = cls;
    double* img = images.data() + i * C * H * W;
    if (spec.kind == SynthKind::Blobs) {
      // one bright blob per class at a class-specific grid anchor
      const int gx = cls % 4, gy = cls / 4;
      const double cx = (0.5 + gx) * W / 4.0, cy = (0.5 + gy) * H / 4.0;
      const double r = std::max(1.5, std::min(H, W) / 6.0);
      for (int ch = 0; ch < C; ++ch) {
        for (int y = 0; y < H; ++y) {
          for (int x = 0; x < W; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            double v = 0.05 + 0.05 * rng.uniform01();
            v += 0.85 * std::exp(-d2 / (2.0 * r * r));
            img[(ch * H + y) * W + x] = std::min(1.0, std::max(0.0, v));
          }
        }
      }
    } else {
      // oriented bar over speckle texture; orientation encodes the class
      const double angle = 3.14159265358979323846 * cls / spec.classes;
      const double ux = std::cos(angle), uy = std::sin(angle);
      const double len = 0.55 * std::min(H, W);
      const double thick = std::max(1.5, std::min(H, W) / 10.0);
      const double cx = W / 2.0 + (rng.uniform01() - 0.5) * W * 0.3;
      const double cy = H / 2.0 + (rng.uniform01() - 0.5) * H * 0.3;
      for (int ch = 0; ch < C; ++ch) {
        for (int y = 0; y < H; ++y) {
          for (int x = 0; x < W; ++x) {
            const double rx = x + 0.5 - cx, ry = y + 0.5 - cy;
            const double along = rx * ux + ry * uy;
            const double across = -rx * uy + ry * ux;
            double v = 0.35 * rng.uniform01();  // background speckle
            if (std::fabs(along) <= len / 2 && std::fabs(across) <= thick / 2) {
              v = 0.75 + 0.25 * rng.uniform01();
            }
            img[(ch * H + y) * W + x] = std::min(1.0, std::max(0.0, v));
          }
        }
      }
    }
  }

  Dataset d;
  d.images = std::move(images);
  d.labels = std::move(labels);
  d.classes = spec.classes;
  d.provenance = "synthetic";
  d.validate();
  return d;
}

void RandomizationPlan::validate(const ModelGraph& m) const {
  std::vector<char> seen(m.node_count(), 0);
  int prev_min = m.node_count();
  for (const auto& group : groups) {
    int gmin = m.node_count(), gmax = -1;
    for (int id : group) {
      if (id < 0 || id >= m.node_count()) {
        throw std::invalid_argument("plan: node id out of range");
      }
      if (!m.node(id).has_params()) {
        throw std::invalid_argument("plan: node '" + m.node(id).name +
                                    "' has no parameters");
      }
      if (seen[id]) {
        throw std::invalid_argument("plan: node '" + m.node(id).name +
                                    "' appears in two groups");
      }
      seen[id] = 1;
      gmin = std::min(gmin, id);
      gmax = std::max(gmax, id);
    }
    if (gmax >= prev_min) {
      throw std::invalid_argument("plan: groups are not ordered top-down");
    }
    if (gmin <= gmax) prev_min = gmin;
  }
}

RandomizationPlan default_plan(const ModelGraph& m, uint64_t base_seed) {
  RandomizationPlan plan;
  plan.base_seed = base_seed;
  const bool has_conv = !m.nodes_of_kind(LayerKind::Conv2D).empty();
  // Conv nets: one head group with every dense layer, then one group per
  // conv stem ("block1.conv1"/"block1.conv2" share a group). Pure MLPs:
  // one group per dense layer, top-down.
  std::vector<int> head;
  std::vector<std::pair<std::string, std::vector<int>>> groups;
  for (int id = m.node_count() - 1; id >= 0; --id) {
    const LayerSpec& n = m.node(id);
    if (!n.has_params()) continue;
    if (n.kind == LayerKind::Dense && has_conv) {
      head.push_back(id);
      continue;
    }
    std::string stem = n.name;
    if (auto dot = stem.find('.'); dot != std::string::npos) {
      stem = stem.substr(0, dot);
    }
    if (!has_conv || groups.empty() || groups.back().first != stem) {
      groups.push_back({stem, {}});
    }
    groups.back().second.push_back(id);
  }
  if (!head.empty()) plan.groups.push_back(std::move(head));
  for (auto& [stem, ids] : groups) plan.groups.push_back(std::move(ids));
  plan.validate(m);
  return plan;
}

ModelGraph randomize(const ModelGraph& m, const RandomizationPlan& plan,
                     int stage, bool cascading) {
  plan.validate(m);
  if (stage < 0 || stage >= static_cast<int>(plan.groups.size())) {
    throw std::invalid_argument("randomize: stage " + std::to_string(stage) +
                                " out of range (groups: " +
                                std::to_string(plan.groups.size()) + ")");
  }
  ModelGraph out = m;
  const int first = cascading ? 0 : stage;
  for (int g = first; g <= stage; ++g) {
    for (int id : plan.groups[g]) {
      LayerSpec& n = out.mutable_node(id);
      Rng rng(derive_seed(plan.base_seed, static_cast<uint64_t>(id)));
      if (n.has_weights()) {
        const double sd = std::sqrt(2.0 / n.init_fan_in());
        for (size_t i = 0; i < n.weights.size(); ++i) {
          n.weights[i] = rng.normal() * sd;
        }
      }
      for (size_t i = 0; i < n.bias.size(); ++i) n.bias[i] = 0.0;
    }
  }
  return out;
}

TrainResult train(const ModelGraph& m, const Dataset& data,
                  const TrainOptions& opt) {
  if (data.count() == 0) throw std::invalid_argument("train: empty dataset");
  if (opt.epochs < 0 || opt.batch_size < 1) {
    throw std::invalid_argument("train: bad options");
  }
  std::vector<size_t> idx = opt.indices;
  if (idx.empty()) {
    idx.resize(data.count());
    std::iota(idx.begin(), idx.end(), 0);
  }
  TrainResult res;
  res.model = m;
  Rng rng(derive_seed(opt.seed, 0x7121));

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    // Fisher-Yates with our own rng, so shuffles are reproducible
    for (size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t start = 0; start < idx.size();
         start += static_cast<size_t>(opt.batch_size)) {
      const size_t stop =
          std::min(idx.size(), start + static_cast<size_t>(opt.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      std::vector<Tensor> wgrad(res.model.node_count());
      std::vector<Tensor> bgrad(res.model.node_count());
      for (size_t s = start; s < stop; ++s) {
        const Tensor x = data.image(idx[s]);
        const int label = data.labels[idx[s]];
        const ForwardResult fr = forward(res.model, x);
        const Tensor& z = fr.logits(res.model);
        const std::vector<double> p = softmax(z);
        loss_sum += -std::log(std::max(p[label], 1e-300));
        size_t am = 0;
        for (size_t k = 1; k < p.size(); ++k) {
          if (z[k] > z[am]) am = k;
        }
        if (static_cast<int>(am) == label) ++correct;

        Tensor seed(z.shape());
        for (size_t k = 0; k < p.size(); ++k) seed[k] = p[k] * inv_batch;
        seed[label] -= inv_batch;
        BackwardOptions bo;
        bo.want_param_grads = true;
        BackwardResult br = backward(res.model, fr, seed, bo);
        for (int id = 0; id < res.model.node_count(); ++id) {
          if (!br.weight_grads.empty() && !br.weight_grads[id].empty()) {
            if (wgrad[id].empty()) wgrad[id] = Tensor(br.weight_grads[id].shape());
            for (size_t k = 0; k < wgrad[id].size(); ++k) {
              wgrad[id][k] += br.weight_grads[id][k];
            }
          }
          if (!br.bias_grads.empty() && !br.bias_grads[id].empty()) {
            if (bgrad[id].empty()) bgrad[id] = Tensor(br.bias_grads[id].shape());
            for (size_t k = 0; k < bgrad[id].size(); ++k) {
              bgrad[id][k] += br.bias_grads[id][k];
            }
          }
        }
      }
      for (int id = 0; id < res.model.node_count(); ++id) {
        LayerSpec& n = res.model.mutable_node(id);
        if (!wgrad[id].empty()) {
          for (size_t k = 0; k < n.weights.size(); ++k) {
            n.weights[k] -= opt.lr * wgrad[id][k];
          }
        }
        if (!bgrad[id].empty()) {
          for (size_t k = 0; k < n.bias.size(); ++k) {
            n.bias[k] -= opt.lr * bgrad[id][k];
          }
        }
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(idx.size());
    if (!std::isfinite(mean_loss)) {
      throw std::runtime_error("train: loss diverged to non-finite at epoch " +
                               std::to_string(epoch));
    }
    res.log.push_back(
        {epoch, mean_loss,
         static_cast<double>(correct) / static_cast<double>(idx.size())});
  }
  return res;
}

double accuracy(const ModelGraph& m, const Dataset& data,
                const std::vector<size_t>& indices) {
  std::vector<size_t> idx = indices;
  if (idx.empty()) {
    idx.resize(data.count());
    std::iota(idx.begin(), idx.end(), 0);
  }
  size_t correct = 0;
  for (size_t i : idx) {
    const Tensor z = forward(m, data.image(i)).logits(m);
    size_t am = 0;
    for (size_t k = 1; k < z.size(); ++k) {
      if (z[k] > z[am]) am = k;
    }
    if (static_cast<int>(am) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace attrib
