#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attrib/kernels.hpp"
#include "attrib/tensor.hpp"

namespace attrib {

enum class LayerKind {
  Input,
  Dense,
  Conv2D,
  AvgPool,
  MaxPool,
  ReLU,
  ResidualAdd,
  Flatten,
  BiasOnly,
};

std::string layer_kind_name(LayerKind k);

/// One node of the layer DAG. Hyperparameters must be consistent with the
/// declared input/output shapes; this is checked when the graph is built.
struct LayerSpec {
  LayerKind kind = LayerKind::Input;
  std::string name;
  std::vector<int> inputs;  // ids of producer nodes (topological order)

  // Conv2D / pooling geometry. Pooling windows must tile exactly.
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  int in_channels = 0;
  int out_channels = 0;

  // Dense geometry.
  int fan_in = 0;
  int fan_out = 0;

  Tensor weights;  // dense: (out,in); conv: (oc,ic,k,k)
  Tensor bias;     // dense/conv: (out); BiasOnly: input shape

  bool has_weights() const {
    return kind == LayerKind::Dense || kind == LayerKind::Conv2D;
  }
  bool has_params() const {
    return has_weights() || kind == LayerKind::BiasOnly;
  }
  /// Fan-in used for variance-scaled initialization.
  int init_fan_in() const;
};

/// Immutable layer DAG with named parameter slots. Nodes are stored in
/// topological order (node inputs always have smaller ids); node 0 is the
/// Input placeholder. All execution is purely functional: forward/backward
/// never mutate the graph, so one instance is safely shared across threads.
class ModelGraph {
 public:
  /// Construction entry point: nodes in topological order, node 0 must be
  /// Input. Runs shape inference and validates every structural invariant.
  ModelGraph(std::vector<size_t> input_shape, std::vector<LayerSpec> nodes,
             int output_node = -1);

  ModelGraph() = default;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  const LayerSpec& node(int id) const { return nodes_.at(id); }
  LayerSpec& mutable_node(int id) { return nodes_.at(id); }
  int input_node() const { return 0; }
  int output_node() const { return output_node_; }
  const std::vector<size_t>& input_shape() const { return node_shape_[0]; }
  const std::vector<size_t>& node_shape(int id) const {
    return node_shape_.at(id);
  }
  int logit_count() const {
    return static_cast<int>(shape_size(node_shape_[output_node_]));
  }

  std::optional<int> split_marker() const { return split_marker_; }
  void set_split_marker(int node_id);

  /// Ids of consumers of each node, derived from the edges.
  const std::vector<std::vector<int>>& consumers() const { return consumers_; }

  /// True if there is a path from `a` to `b` (a strict ancestor).
  bool is_ancestor(int a, int b) const;

  /// True if every input-to-output path passes through the node.
  bool is_cut(int node_id) const;

  int find_node(const std::string& name) const;  // -1 if absent
  std::vector<int> nodes_of_kind(LayerKind k) const;

  /// Total number of parameter scalars.
  size_t param_count() const;

  kernels::Conv2DSpec conv_spec(int id) const;

 private:
  void infer_shapes();

  std::vector<LayerSpec> nodes_;
  std::vector<std::vector<size_t>> node_shape_;
  std::vector<std::vector<int>> consumers_;
  int output_node_ = -1;
  std::optional<int> split_marker_;
};

/// All intermediate activations of one forward pass, indexed by node id.
struct ForwardResult {
  std::vector<Tensor> acts;
  const Tensor& logits(const ModelGraph& m) const {
    return acts[m.output_node()];
  }
};

ForwardResult forward(const ModelGraph& m, const Tensor& input);

struct BackwardOptions {
  bool guided = false;            // guided-backprop ReLU rule
  bool want_param_grads = false;  // fill weight/bias grads (for training)
};

struct BackwardResult {
  Tensor input_grad;
  // Indexed by node id; empty tensors for parameterless nodes.
  std::vector<Tensor> weight_grads;
  std::vector<Tensor> bias_grads;
};

/// Reverse-mode pass seeded with `seed` at the output node.
/// ReLU subgradient at exactly 0 is 0. The guided variant additionally
/// zeroes the gradient at each ReLU where the incoming gradient is <= 0.
BackwardResult backward(const ModelGraph& m, const ForwardResult& fr,
                        const Tensor& seed, const BackwardOptions& opt = {});

/// Gradient of the selected logit w.r.t. the input.
Tensor backward_vjp(const ModelGraph& m, const Tensor& input,
                    int output_selector);
Tensor backward_guided(const ModelGraph& m, const Tensor& input,
                       int output_selector);

/// Splits the model at a node that forms a cut of the DAG, returning the
/// bottom part (input..node) and the top part (node..logits). Composing
/// the two forwards reproduces the full forward bit-exactly.
std::pair<ModelGraph, ModelGraph> split_at(const ModelGraph& m, int node_id);

std::vector<double> softmax(const Tensor& logits);

}  // namespace attrib
