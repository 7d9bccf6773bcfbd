#include "attrib/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attrib {

namespace {
kernels::Conv2DSpec conv_spec_for(const LayerSpec& n, int in_h, int in_w) {
  kernels::Conv2DSpec cs;
  cs.in_c = n.in_channels;
  cs.out_c = n.out_channels;
  cs.in_h = in_h;
  cs.in_w = in_w;
  cs.k = n.kernel;
  cs.stride = n.stride;
  cs.pad = n.pad;
  return cs;
}
}  // namespace

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::ReLU: return "relu";
    case LayerKind::ResidualAdd: return "residual_add";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::BiasOnly: return "bias_only";
  }
  return "?";
}

int LayerSpec::init_fan_in() const {
  switch (kind) {
    case LayerKind::Dense: return fan_in;
    case LayerKind::Conv2D: return in_channels * kernel * kernel;
    default: return 0;
  }
}

ModelGraph::ModelGraph(std::vector<size_t> input_shape,
                       std::vector<LayerSpec> nodes, int output_node)
    : nodes_(std::move(nodes)), output_node_(output_node) {
  if (nodes_.empty() || nodes_[0].kind != LayerKind::Input) {
    throw std::invalid_argument("ModelGraph: node 0 must be the input node");
  }
  if (output_node_ < 0) output_node_ = node_count() - 1;
  if (output_node_ >= node_count()) {
    throw std::invalid_argument("ModelGraph: output node out of range");
  }
  node_shape_.assign(nodes_.size(), {});
  node_shape_[0] = std::move(input_shape);
  consumers_.assign(nodes_.size(), {});
  for (int id = 1; id < node_count(); ++id) {
    const LayerSpec& n = nodes_[id];
    if (n.inputs.empty() && n.kind != LayerKind::Input) {
      throw std::invalid_argument("ModelGraph: node '" + n.name +
                                  "' has no inputs");
    }
    for (int in : n.inputs) {
      if (in < 0 || in >= id) {
        // forward-only edges enforce acyclicity
        throw std::invalid_argument("ModelGraph: node '" + n.name +
                                    "' references node " + std::to_string(in) +
                                    " (must be an earlier node)");
      }
      consumers_[in].push_back(id);
    }
  }
  infer_shapes();

  // every node must be reachable from the input
  std::vector<char> reach(nodes_.size(), 0);
  reach[0] = 1;
  for (int id = 1; id < node_count(); ++id) {
    for (int in : nodes_[id].inputs) {
      if (reach[in]) reach[id] = 1;
    }
  }
  for (int id = 0; id < node_count(); ++id) {
    if (!reach[id]) {
      throw std::invalid_argument("ModelGraph: node '" + nodes_[id].name +
                                  "' is not reachable from the input");
    }
  }
}

void ModelGraph::set_split_marker(int node_id) {
  if (node_id < 0 || node_id >= node_count()) {
    throw std::invalid_argument("split marker out of range");
  }
  if (!is_cut(node_id)) {
    throw std::invalid_argument("split marker '" + nodes_[node_id].name +
                                "' is not a cut of the graph");
  }
  split_marker_ = node_id;
}

bool ModelGraph::is_cut(int node_id) const {
  if (node_id == 0 || node_id == output_node_) return true;
  // with the node removed, the output must become unreachable
  std::vector<char> reach(node_count(), 0);
  reach[0] = 1;
  for (int id = 1; id < node_count(); ++id) {
    if (id == node_id) continue;
    for (int in : nodes_[id].inputs) {
      if (reach[in]) {
        reach[id] = 1;
        break;
      }
    }
  }
  return !reach[output_node_];
}

void ModelGraph::infer_shapes() {
  for (int id = 1; id < node_count(); ++id) {
    LayerSpec& n = nodes_[id];
    const auto in_shape = [&](int slot) -> const std::vector<size_t>& {
      return node_shape_[n.inputs.at(slot)];
    };
    switch (n.kind) {
      case LayerKind::Input:
        throw std::invalid_argument("ModelGraph: duplicate input node '" +
                                    n.name + "'");
      case LayerKind::Dense: {
        const auto& s = in_shape(0);
        if (s.size() != 1) {
          throw std::invalid_argument("dense node '" + n.name +
                                      "' needs a flat input, got " +
                                      shape_str(s));
        }
        if (static_cast<int>(s[0]) != n.fan_in) {
          throw std::invalid_argument(
              "dense node '" + n.name + "': fan_in " +
              std::to_string(n.fan_in) + " does not match input " +
              shape_str(s));
        }
        if (n.weights.shape() !=
                std::vector<size_t>{static_cast<size_t>(n.fan_out),
                                    static_cast<size_t>(n.fan_in)} ||
            n.bias.shape() != std::vector<size_t>{static_cast<size_t>(n.fan_out)}) {
          throw std::invalid_argument("dense node '" + n.name +
                                      "': parameter shapes inconsistent");
        }
        node_shape_[id] = {static_cast<size_t>(n.fan_out)};
        break;
      }
      case LayerKind::Conv2D: {
        const auto& s = in_shape(0);
        if (s.size() != 3) {
          throw std::invalid_argument("conv node '" + n.name +
                                      "' needs a (C,H,W) input, got " +
                                      shape_str(s));
        }
        if (static_cast<int>(s[0]) != n.in_channels) {
          throw std::invalid_argument("conv node '" + n.name +
                                      "': in_channels mismatch");
        }
        const int h = static_cast<int>(s[1]), w = static_cast<int>(s[2]);
        if (n.kernel <= 0 || n.stride <= 0 || n.pad < 0) {
          throw std::invalid_argument("conv node '" + n.name +
                                      "': bad geometry");
        }
        if ((h + 2 * n.pad - n.kernel) % n.stride != 0 ||
            (w + 2 * n.pad - n.kernel) % n.stride != 0 ||
            h + 2 * n.pad < n.kernel || w + 2 * n.pad < n.kernel) {
          throw std::invalid_argument("conv node '" + n.name +
                                      "': geometry does not cover input " +
                                      shape_str(s));
        }
        if (n.weights.shape() !=
                std::vector<size_t>{static_cast<size_t>(n.out_channels),
                                    static_cast<size_t>(n.in_channels),
                                    static_cast<size_t>(n.kernel),
                                    static_cast<size_t>(n.kernel)} ||
            n.bias.shape() !=
                std::vector<size_t>{static_cast<size_t>(n.out_channels)}) {
          throw std::invalid_argument("conv node '" + n.name +
                                      "': parameter shapes inconsistent");
        }
        const auto cs = conv_spec_for(n, h, w);
        node_shape_[id] = {static_cast<size_t>(n.out_channels),
                           static_cast<size_t>(cs.out_h()),
                           static_cast<size_t>(cs.out_w())};
        break;
      }
      case LayerKind::AvgPool:
      case LayerKind::MaxPool: {
        const auto& s = in_shape(0);
        if (s.size() != 3) {
          throw std::invalid_argument("pool node '" + n.name +
                                      "' needs a (C,H,W) input");
        }
        if (n.kernel <= 0 || s[1] % n.kernel != 0 || s[2] % n.kernel != 0) {
          // windows must tile exactly so relevance redistribution stays
          // well-defined
          throw std::invalid_argument("pool node '" + n.name + "': kernel " +
                                      std::to_string(n.kernel) +
                                      " does not tile input " + shape_str(s));
        }
        node_shape_[id] = {s[0], s[1] / n.kernel, s[2] / n.kernel};
        break;
      }
      case LayerKind::ReLU:
        node_shape_[id] = in_shape(0);
        break;
      case LayerKind::ResidualAdd: {
        if (n.inputs.size() != 2) {
          throw std::invalid_argument("residual_add node '" + n.name +
                                      "' needs exactly two inputs");
        }
        if (in_shape(0) != in_shape(1)) {
          throw std::invalid_argument("residual_add node '" + n.name +
                                      "': input shapes differ: " +
                                      shape_str(in_shape(0)) + " vs " +
                                      shape_str(in_shape(1)));
        }
        node_shape_[id] = in_shape(0);
        break;
      }
      case LayerKind::Flatten:
        node_shape_[id] = {shape_size(in_shape(0))};
        break;
      case LayerKind::BiasOnly: {
        if (n.bias.shape() != in_shape(0)) {
          throw std::invalid_argument("bias_only node '" + n.name +
                                      "': bias shape must match input");
        }
        node_shape_[id] = in_shape(0);
        break;
      }
    }
    if (n.kind != LayerKind::ResidualAdd && n.inputs.size() != 1) {
      throw std::invalid_argument("node '" + n.name +
                                  "' must have exactly one input");
    }
  }
}

kernels::Conv2DSpec ModelGraph::conv_spec(int id) const {
  const LayerSpec& n = nodes_.at(id);
  const auto& s = node_shape_[n.inputs[0]];
  return conv_spec_for(n, static_cast<int>(s[1]), static_cast<int>(s[2]));
}

bool ModelGraph::is_ancestor(int a, int b) const {
  if (a >= b) return false;
  std::vector<char> mark(b + 1, 0);
  mark[a] = 1;
  for (int id = a + 1; id <= b; ++id) {
    for (int in : nodes_[id].inputs) {
      if (in <= b && mark[in]) {
        mark[id] = 1;
        break;
      }
    }
  }
  return mark[b] != 0;
}

int ModelGraph::find_node(const std::string& name) const {
  for (int id = 0; id < node_count(); ++id) {
    if (nodes_[id].name == name) return id;
  }
  return -1;
}

std::vector<int> ModelGraph::nodes_of_kind(LayerKind k) const {
  std::vector<int> out;
  for (int id = 0; id < node_count(); ++id) {
    if (nodes_[id].kind == k) out.push_back(id);
  }
  return out;
}

size_t ModelGraph::param_count() const {
  size_t n = 0;
  for (const auto& node : nodes_) n += node.weights.size() + node.bias.size();
  return n;
}

ForwardResult forward(const ModelGraph& m, const Tensor& input) {
  if (input.shape() != m.input_shape()) {
    throw std::invalid_argument("forward: input shape " +
                                shape_str(input.shape()) +
                                " does not match model input " +
                                shape_str(m.input_shape()));
  }
  ForwardResult fr;
  fr.acts.resize(m.node_count());
  fr.acts[0] = input;
  for (int id = 1; id < m.node_count(); ++id) {
    const LayerSpec& n = m.node(id);
    const Tensor& x = fr.acts[n.inputs[0]];
    switch (n.kind) {
      case LayerKind::Input:
        break;
      case LayerKind::Dense: {
        std::vector<double> y(n.fan_out);
        kernels::dense_forward(x.data(), n.weights.data(), n.bias.data(),
                               n.fan_in, n.fan_out, y.data());
        fr.acts[id] = Tensor({static_cast<size_t>(n.fan_out)}, std::move(y));
        break;
      }
      case LayerKind::Conv2D: {
        const auto cs = m.conv_spec(id);
        std::vector<double> y(static_cast<size_t>(cs.out_c) * cs.out_h() *
                              cs.out_w());
        kernels::conv2d_forward(x.data(), cs, n.weights.data(), n.bias.data(),
                                y.data());
        fr.acts[id] = Tensor(m.node_shape(id), std::move(y));
        break;
      }
      case LayerKind::AvgPool: {
        const auto& os = m.node_shape(id);
        const int c = static_cast<int>(os[0]), oh = static_cast<int>(os[1]),
                  ow = static_cast<int>(os[2]);
        const int k = n.kernel, ih = oh * k, iw = ow * k;
        const double inv = 1.0 / (static_cast<double>(k) * k);
        std::vector<double> y(static_cast<size_t>(c) * oh * ow);
        for (int ch = 0; ch < c; ++ch) {
          for (int r = 0; r < oh; ++r) {
            for (int cc = 0; cc < ow; ++cc) {
              double acc = 0.0;
              for (int kr = 0; kr < k; ++kr) {
                for (int kc = 0; kc < k; ++kc) {
                  acc += x[(ch * ih + r * k + kr) * iw + cc * k + kc];
                }
              }
              y[(ch * oh + r) * ow + cc] = acc * inv;
            }
          }
        }
        fr.acts[id] = Tensor(os, std::move(y));
        break;
      }
      case LayerKind::MaxPool: {
        const auto& os = m.node_shape(id);
        const int c = static_cast<int>(os[0]), oh = static_cast<int>(os[1]),
                  ow = static_cast<int>(os[2]);
        const int k = n.kernel, ih = oh * k, iw = ow * k;
        std::vector<double> y(static_cast<size_t>(c) * oh * ow);
        for (int ch = 0; ch < c; ++ch) {
          for (int r = 0; r < oh; ++r) {
            for (int cc = 0; cc < ow; ++cc) {
              double best = x[(ch * ih + r * k) * iw + cc * k];
              for (int kr = 0; kr < k; ++kr) {
                for (int kc = 0; kc < k; ++kc) {
                  best = std::max(best,
                                  x[(ch * ih + r * k + kr) * iw + cc * k + kc]);
                }
              }
              y[(ch * oh + r) * ow + cc] = best;
            }
          }
        }
        fr.acts[id] = Tensor(os, std::move(y));
        break;
      }
      case LayerKind::ReLU: {
        std::vector<double> y(x.values());
        for (double& v : y) v = v > 0.0 ? v : 0.0;
        fr.acts[id] = Tensor(x.shape(), std::move(y));
        break;
      }
      case LayerKind::ResidualAdd: {
        const Tensor& b = fr.acts[n.inputs[1]];
        std::vector<double> y(x.size());
        for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] + b[i];
        fr.acts[id] = Tensor(x.shape(), std::move(y));
        break;
      }
      case LayerKind::Flatten:
        fr.acts[id] = x.reshaped(m.node_shape(id));
        break;
      case LayerKind::BiasOnly: {
        std::vector<double> y(x.size());
        for (size_t i = 0; i < y.size(); ++i) y[i] = x[i] + n.bias[i];
        fr.acts[id] = Tensor(x.shape(), std::move(y));
        break;
      }
    }
  }
  return fr;
}

BackwardResult backward(const ModelGraph& m, const ForwardResult& fr,
                        const Tensor& seed, const BackwardOptions& opt) {
  if (seed.shape() != m.node_shape(m.output_node())) {
    throw std::invalid_argument("backward: seed shape mismatch");
  }
  std::vector<Tensor> grads(m.node_count());
  grads[m.output_node()] = seed;
  BackwardResult out;
  if (opt.want_param_grads) {
    out.weight_grads.resize(m.node_count());
    out.bias_grads.resize(m.node_count());
  }

  const auto grad_of = [&](int id) -> Tensor& {
    if (grads[id].empty()) grads[id] = Tensor(m.node_shape(id));
    return grads[id];
  };

  for (int id = m.node_count() - 1; id >= 1; --id) {
    if (grads[id].empty()) continue;  // node not upstream of the seed
    const LayerSpec& n = m.node(id);
    const Tensor& gy = grads[id];
    const Tensor& x = fr.acts[n.inputs[0]];
    switch (n.kind) {
      case LayerKind::Input:
        break;
      case LayerKind::Dense: {
        Tensor& gx = grad_of(n.inputs[0]);
        std::vector<double> tmp(n.fan_in);
        kernels::dense_backward_data(gy.data(), n.weights.data(), n.fan_in,
                                     n.fan_out, tmp.data());
        for (int i = 0; i < n.fan_in; ++i) gx[i] += tmp[i];
        if (opt.want_param_grads) {
          if (out.weight_grads[id].empty()) {
            out.weight_grads[id] = Tensor(n.weights.shape());
            out.bias_grads[id] = Tensor(n.bias.shape());
          }
          Tensor& gw = out.weight_grads[id];
          Tensor& gb = out.bias_grads[id];
          for (int o = 0; o < n.fan_out; ++o) {
            for (int i = 0; i < n.fan_in; ++i) {
              gw[static_cast<size_t>(o) * n.fan_in + i] += gy[o] * x[i];
            }
            gb[o] += gy[o];
          }
        }
        break;
      }
      case LayerKind::Conv2D: {
        const auto cs = m.conv_spec(id);
        Tensor& gx = grad_of(n.inputs[0]);
        std::vector<double> tmp(x.size());
        kernels::conv2d_backward_data(gy.data(), cs, n.weights.data(),
                                      tmp.data());
        for (size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
        if (opt.want_param_grads) {
          if (out.weight_grads[id].empty()) {
            out.weight_grads[id] = Tensor(n.weights.shape());
            out.bias_grads[id] = Tensor(n.bias.shape());
          }
          kernels::conv2d_backward_weights(x.data(), gy.data(), cs,
                                           out.weight_grads[id].data(),
                                           out.bias_grads[id].data());
        }
        break;
      }
      case LayerKind::AvgPool: {
        Tensor& gx = grad_of(n.inputs[0]);
        const auto& os = m.node_shape(id);
        const int c = static_cast<int>(os[0]), oh = static_cast<int>(os[1]),
                  ow = static_cast<int>(os[2]);
        const int k = n.kernel, ih = oh * k, iw = ow * k;
        const double inv = 1.0 / (static_cast<double>(k) * k);
        for (int ch = 0; ch < c; ++ch) {
          for (int r = 0; r < oh; ++r) {
            for (int cc = 0; cc < ow; ++cc) {
              const double g = gy[(ch * oh + r) * ow + cc] * inv;
              for (int kr = 0; kr < k; ++kr) {
                for (int kc = 0; kc < k; ++kc) {
                  gx[(ch * ih + r * k + kr) * iw + cc * k + kc] += g;
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::MaxPool: {
        Tensor& gx = grad_of(n.inputs[0]);
        const auto& os = m.node_shape(id);
        const int c = static_cast<int>(os[0]), oh = static_cast<int>(os[1]),
                  ow = static_cast<int>(os[2]);
        const int k = n.kernel, ih = oh * k, iw = ow * k;
        for (int ch = 0; ch < c; ++ch) {
          for (int r = 0; r < oh; ++r) {
            for (int cc = 0; cc < ow; ++cc) {
              // first maximum in row-major window order wins
              int bi = r * k, bj = cc * k;
              double best = x[(ch * ih + bi) * iw + bj];
              for (int kr = 0; kr < k; ++kr) {
                for (int kc = 0; kc < k; ++kc) {
                  const double v =
                      x[(ch * ih + r * k + kr) * iw + cc * k + kc];
                  if (v > best) {
                    best = v;
                    bi = r * k + kr;
                    bj = cc * k + kc;
                  }
                }
              }
              gx[(ch * ih + bi) * iw + bj] += gy[(ch * oh + r) * ow + cc];
            }
          }
        }
        break;
      }
      case LayerKind::ReLU: {
        Tensor& gx = grad_of(n.inputs[0]);
        for (size_t i = 0; i < gy.size(); ++i) {
          double g = x[i] > 0.0 ? gy[i] : 0.0;
          if (opt.guided && g <= 0.0) g = 0.0;
          gx[i] += g;
        }
        break;
      }
      case LayerKind::ResidualAdd: {
        Tensor& ga = grad_of(n.inputs[0]);
        Tensor& gb = grad_of(n.inputs[1]);
        for (size_t i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i];
          gb[i] += gy[i];
        }
        break;
      }
      case LayerKind::Flatten: {
        Tensor& gx = grad_of(n.inputs[0]);
        for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
        break;
      }
      case LayerKind::BiasOnly: {
        Tensor& gx = grad_of(n.inputs[0]);
        for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
        if (opt.want_param_grads) {
          if (out.bias_grads[id].empty()) {
            out.bias_grads[id] = Tensor(n.bias.shape());
          }
          for (size_t i = 0; i < gy.size(); ++i) out.bias_grads[id][i] += gy[i];
        }
        break;
      }
    }
  }
  out.input_grad = grads[0].empty() ? Tensor(m.input_shape()) : grads[0];
  return out;
}

namespace {
Tensor logit_seed(const ModelGraph& m, int output_selector) {
  if (output_selector < 0 || output_selector >= m.logit_count()) {
    throw std::invalid_argument("output selector " +
                                std::to_string(output_selector) +
                                " out of range (logits: " +
                                std::to_string(m.logit_count()) + ")");
  }
  Tensor seed(m.node_shape(m.output_node()));
  seed[output_selector] = 1.0;
  return seed;
}
}  // namespace

Tensor backward_vjp(const ModelGraph& m, const Tensor& input,
                    int output_selector) {
  const ForwardResult fr = forward(m, input);
  return backward(m, fr, logit_seed(m, output_selector)).input_grad;
}

Tensor backward_guided(const ModelGraph& m, const Tensor& input,
                       int output_selector) {
  const ForwardResult fr = forward(m, input);
  BackwardOptions opt;
  opt.guided = true;
  return backward(m, fr, logit_seed(m, output_selector), opt).input_grad;
}

std::pair<ModelGraph, ModelGraph> split_at(const ModelGraph& m, int node_id) {
  if (node_id < 0 || node_id >= m.node_count()) {
    throw std::invalid_argument("split_at: node out of range");
  }
  if (!m.is_cut(node_id)) {
    throw std::invalid_argument("split_at: node '" + m.node(node_id).name +
                                "' is not a cut of the graph");
  }

  // bottom part: ancestors of node_id (plus the node itself)
  std::vector<char> keep(m.node_count(), 0);
  keep[node_id] = 1;
  for (int id = node_id; id >= 1; --id) {
    if (!keep[id]) continue;
    for (int in : m.node(id).inputs) keep[in] = 1;
  }
  keep[0] = 1;
  std::vector<int> remap(m.node_count(), -1);
  std::vector<LayerSpec> bottom_nodes;
  for (int id = 0; id < m.node_count(); ++id) {
    if (!keep[id]) continue;
    LayerSpec n = m.node(id);
    for (int& in : n.inputs) in = remap[in];
    remap[id] = static_cast<int>(bottom_nodes.size());
    bottom_nodes.push_back(std::move(n));
  }
  ModelGraph bottom(m.input_shape(), std::move(bottom_nodes), remap[node_id]);

  // top part: node_id becomes the new input
  std::vector<LayerSpec> top_nodes;
  LayerSpec top_in;
  top_in.kind = LayerKind::Input;
  top_in.name = "input";
  top_nodes.push_back(top_in);
  std::vector<int> remap_top(m.node_count(), -1);
  remap_top[node_id] = 0;
  for (int id = node_id + 1; id < m.node_count(); ++id) {
    // only descendants of node_id survive; the cut property guarantees the
    // output is among them
    bool uses = false;
    for (int in : m.node(id).inputs) uses = uses || remap_top[in] >= 0;
    if (!uses) continue;
    LayerSpec n = m.node(id);
    for (int& in : n.inputs) {
      if (remap_top[in] < 0) {
        throw std::invalid_argument("split_at: node '" + n.name +
                                    "' crosses the cut at '" +
                                    m.node(node_id).name + "'");
      }
      in = remap_top[in];
    }
    remap_top[id] = static_cast<int>(top_nodes.size());
    top_nodes.push_back(std::move(n));
  }
  if (remap_top[m.output_node()] < 0 && node_id != m.output_node()) {
    throw std::invalid_argument("split_at: output lost by the cut");
  }
  const int top_out =
      node_id == m.output_node() ? 0 : remap_top[m.output_node()];
  ModelGraph top(m.node_shape(node_id), std::move(top_nodes), top_out);
  return {std::move(bottom), std::move(top)};
}

std::vector<double> softmax(const Tensor& logits) {
  double mx = logits[0];
  for (size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace attrib
