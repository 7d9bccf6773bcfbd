#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attrib/attribution.hpp"
#include "attrib/kernels.hpp"

namespace attrib {

LrpRule LrpRule::epsilon(double e) {
  LrpRule r;
  r.kind = Kind::Epsilon;
  r.eps = e;
  return r;
}
LrpRule LrpRule::gamma_rule(double g) {
  LrpRule r;
  r.kind = Kind::Gamma;
  r.gamma = g;
  return r;
}
LrpRule LrpRule::beta_rule(double b) {
  LrpRule r;
  r.kind = Kind::Beta;
  r.beta = b;
  return r;
}
LrpRule LrpRule::adaptive_beta_rule(double cap) {
  LrpRule r;
  r.kind = Kind::AdaptiveBeta;
  r.cap = cap;
  return r;
}
LrpRule LrpRule::zbox(double low, double high) {
  LrpRule r;
  r.kind = Kind::ZBox;
  r.low = low;
  r.high = high;
  return r;
}

LrpConfig LrpConfig::lrp0() {
  LrpConfig c;
  c.name = "lrp0";
  return c;
}

LrpConfig LrpConfig::lrp_epsilon(double eps) {
  LrpConfig c;
  c.name = "lrp_eps";
  c.conv = LrpRule::epsilon(eps);
  c.dense = LrpRule::epsilon(eps);
  return c;
}

LrpConfig LrpConfig::gamma_stack(double bottom, double top) {
  LrpConfig c;
  c.name = "lrp_gamma";
  c.conv = LrpRule::gamma_rule(bottom);
  c.dense = LrpRule::zero();
  c.first_layer = LrpRule::zbox();
  c.gamma_decay = true;
  c.gamma_bottom = bottom;
  c.gamma_top = top;
  return c;
}

LrpConfig LrpConfig::beta_stack(double beta, double eps) {
  LrpConfig c;
  c.name = "lrp_beta";
  c.conv = LrpRule::beta_rule(beta);
  c.dense = LrpRule::epsilon(eps);
  return c;
}

LrpConfig LrpConfig::adaptive_stack(double cap, double eps) {
  LrpConfig c;
  c.name = "lrp_ab";
  c.conv = LrpRule::adaptive_beta_rule(cap);
  c.dense = LrpRule::epsilon(eps);
  return c;
}

double adaptive_beta(const std::vector<double>& contributions, double cap,
                     bool algebraic) {
  double pos = 0.0, neg = 0.0;  // neg accumulates -sum of negative parts
  for (double c : contributions) {
    if (c > 0.0) {
      pos += c;
    } else {
      neg -= c;
    }
  }
  if (pos + neg <= 0.0) return 0.0;
  double beta;
  if (algebraic) {
    beta = pos > neg ? neg / (pos - neg) : cap;
  } else {
    beta = neg / (pos + neg);
  }
  return std::min(beta, cap);
}

namespace {

constexpr double kAbsorb = 1e-12;

double stabilized_share(double r, double z, double eps, bool& absorbed) {
  const double den = z + eps * (z >= 0.0 ? 1.0 : -1.0);
  if (std::fabs(den) < kAbsorb) {
    if (r != 0.0) absorbed = true;
    return 0.0;
  }
  return r / den;
}

Tensor pos_part(const Tensor& t) {
  Tensor r = t;
  for (size_t i = 0; i < r.size(); ++i) r[i] = std::max(r[i], 0.0);
  return r;
}

Tensor neg_part(const Tensor& t) {
  Tensor r = t;
  for (size_t i = 0; i < r.size(); ++i) r[i] = std::min(r[i], 0.0);
  return r;
}

/// Shared linear algebra for Dense and Conv2D relevance rules: z = W a (+b)
/// and the transposed map c = W^T s, with interchangeable weight variants.
struct LinearView {
  const ModelGraph& m;
  int id;
  bool is_conv;
  kernels::Conv2DSpec cs;

  LinearView(const ModelGraph& model, int node_id)
      : m(model), id(node_id), is_conv(m.node(id).kind == LayerKind::Conv2D) {
    if (is_conv) cs = m.conv_spec(id);
  }

  size_t out_size() const { return shape_size(m.node_shape(id)); }

  Tensor fwd(const Tensor& a, const Tensor& w, const Tensor* b) const {
    const LayerSpec& n = m.node(id);
    std::vector<double> y(out_size());
    if (is_conv) {
      kernels::conv2d_forward(a.data(), cs, w.data(), b ? b->data() : nullptr,
                              y.data());
    } else {
      kernels::dense_forward(a.data(), w.data(), b ? b->data() : nullptr,
                             n.fan_in, n.fan_out, y.data());
    }
    return Tensor(m.node_shape(id), std::move(y));
  }

  Tensor bwd(const Tensor& s, const Tensor& w) const {
    const LayerSpec& n = m.node(id);
    const auto& in_shape = m.node_shape(n.inputs[0]);
    std::vector<double> c(shape_size(in_shape));
    if (is_conv) {
      kernels::conv2d_backward_data(s.data(), cs, w.data(), c.data());
    } else {
      kernels::dense_backward_data(s.data(), w.data(), n.fan_in, n.fan_out,
                                   c.data());
    }
    return Tensor(in_shape, std::move(c));
  }
};

class LrpEngine {
 public:
  LrpEngine(const ModelGraph& m, const ForwardResult& fr, const LrpConfig& cfg)
      : m_(m), fr_(fr), cfg_(cfg) {
    resolve_rules();
  }

  /// Propagates the given initial relevances down to the input; returns
  /// one relevance tensor per node (empty where no relevance arrived).
  std::vector<Tensor> propagate(
      const std::vector<std::pair<int, Tensor>>& init) {
    std::vector<Tensor> rel(m_.node_count());
    int top = 0;
    for (const auto& [id, r] : init) {
      if (r.shape() != m_.node_shape(id)) {
        throw std::invalid_argument("lrp: bad init shape at node '" +
                                    m_.node(id).name + "'");
      }
      accumulate(rel[id], r, m_.node_shape(id));
      top = std::max(top, id);
    }
    for (int id = top; id >= 1; --id) {
      if (rel[id].empty()) continue;
      distribute(id, rel[id], rel);
    }
    return rel;
  }

  bool absorbed() const { return absorbed_; }

  // skip_split support: capture the two shares at one ResidualAdd
  void capture_at(int add_node) { capture_add_ = add_node; }
  const Tensor& captured_first() const { return captured_first_; }
  const Tensor& captured_second() const { return captured_second_; }

 private:
  void resolve_rules() {
    rules_.assign(m_.node_count(), LrpRule::zero());
    // geometric gamma interpolation across conv depth, bottom -> top
    const std::vector<int> convs = m_.nodes_of_kind(LayerKind::Conv2D);
    int first_param = -1;
    for (int id = 0; id < m_.node_count(); ++id) {
      if (m_.node(id).has_weights()) {
        first_param = id;
        break;
      }
    }
    for (int id = 0; id < m_.node_count(); ++id) {
      const LayerSpec& n = m_.node(id);
      if (!n.has_weights()) continue;
      LrpRule rule = n.kind == LayerKind::Conv2D ? cfg_.conv : cfg_.dense;
      if (rule.kind == LrpRule::Kind::Gamma && cfg_.gamma_decay &&
          n.kind == LayerKind::Conv2D && convs.size() > 1) {
        const auto pos = std::find(convs.begin(), convs.end(), id);
        const double t = static_cast<double>(pos - convs.begin()) /
                         static_cast<double>(convs.size() - 1);
        rule.gamma =
            cfg_.gamma_bottom * std::pow(cfg_.gamma_top / cfg_.gamma_bottom, t);
      }
      if (id == first_param && cfg_.first_layer) rule = *cfg_.first_layer;
      rules_[id] = rule;
    }
  }

  static void accumulate(Tensor& dst, const Tensor& src,
                         const std::vector<size_t>& shape) {
    if (dst.empty()) dst = Tensor(shape);
    for (size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
  }

  void distribute(int id, const Tensor& R, std::vector<Tensor>& rel) {
    const LayerSpec& n = m_.node(id);
    const int in0 = n.inputs[0];
    const Tensor& a = fr_.acts[in0];
    switch (n.kind) {
      case LayerKind::Input:
        return;
      case LayerKind::Dense:
      case LayerKind::Conv2D:
        distribute_linear(id, R, rel);
        return;
      case LayerKind::ReLU: {
        // identity for relevance: zero activations received zero upstream
        accumulate(rel[in0], R, a.shape());
        return;
      }
      case LayerKind::Flatten: {
        accumulate(rel[in0], R.reshaped(a.shape()), a.shape());
        return;
      }
      case LayerKind::BiasOnly: {
        Tensor r(a.shape());
        for (size_t i = 0; i < R.size(); ++i) {
          const double z = a[i] + n.bias[i];
          r[i] = a[i] * stabilized_share(R[i], z, 0.0, absorbed_);
        }
        accumulate(rel[in0], r, a.shape());
        return;
      }
      case LayerKind::AvgPool: {
        // redistribution proportional to squared activations
        const auto& os = m_.node_shape(id);
        const int c = static_cast<int>(os[0]), oh = static_cast<int>(os[1]),
                  ow = static_cast<int>(os[2]);
        const int k = n.kernel, ih = oh * k, iw = ow * k;
        Tensor r(a.shape());
        for (int ch = 0; ch < c; ++ch) {
          for (int row = 0; row < oh; ++row) {
            for (int col = 0; col < ow; ++col) {
              double z = 0.0;
              for (int kr = 0; kr < k; ++kr) {
                for (int kc = 0; kc < k; ++kc) {
                  const double v =
                      a[(ch * ih + row * k + kr) * iw + col * k + kc];
                  z += v * v;
                }
              }
              const double share = stabilized_share(
                  R[(ch * oh + row) * ow + col], z, 0.0, absorbed_);
              if (share == 0.0) continue;
              for (int kr = 0; kr < k; ++kr) {
                for (int kc = 0; kc < k; ++kc) {
                  const size_t at =
                      (ch * ih + row * k + kr) * iw + col * k + kc;
                  r[at] += a[at] * a[at] * share;
                }
              }
            }
          }
        }
        accumulate(rel[in0], r, a.shape());
        return;
      }
      case LayerKind::MaxPool: {
        // winner takes all; first maximum in row-major window order
        const auto& os = m_.node_shape(id);
        const int c = static_cast<int>(os[0]), oh = static_cast<int>(os[1]),
                  ow = static_cast<int>(os[2]);
        const int k = n.kernel, ih = oh * k, iw = ow * k;
        Tensor r(a.shape());
        for (int ch = 0; ch < c; ++ch) {
          for (int row = 0; row < oh; ++row) {
            for (int col = 0; col < ow; ++col) {
              size_t best = (ch * ih + row * k) * iw + col * k;
              for (int kr = 0; kr < k; ++kr) {
                for (int kc = 0; kc < k; ++kc) {
                  const size_t at =
                      (ch * ih + row * k + kr) * iw + col * k + kc;
                  if (a[at] > a[best]) best = at;
                }
              }
              r[best] += R[(ch * oh + row) * ow + col];
            }
          }
        }
        accumulate(rel[in0], r, a.shape());
        return;
      }
      case LayerKind::ResidualAdd: {
        const int in1 = n.inputs[1];
        const Tensor& b = fr_.acts[in1];
        Tensor ra(a.shape()), rb(b.shape());
        for (size_t i = 0; i < R.size(); ++i) {
          const double share =
              stabilized_share(R[i], a[i] + b[i], 0.0, absorbed_);
          ra[i] = a[i] * share;
          rb[i] = b[i] * share;
        }
        if (id == capture_add_) {
          captured_first_ = ra;
          captured_second_ = rb;
        }
        accumulate(rel[in0], ra, a.shape());
        accumulate(rel[in1], rb, b.shape());
        return;
      }
    }
  }

  void distribute_linear(int id, const Tensor& R, std::vector<Tensor>& rel) {
    const LayerSpec& n = m_.node(id);
    const LrpRule& rule = rules_[id];
    const int in0 = n.inputs[0];
    const Tensor& a = fr_.acts[in0];
    const LinearView lin(m_, id);
    Tensor r_in(a.shape());

    switch (rule.kind) {
      case LrpRule::Kind::Zero:
      case LrpRule::Kind::Epsilon:
      case LrpRule::Kind::Gamma: {
        Tensor w = n.weights;
        Tensor b = n.bias;
        if (rule.kind == LrpRule::Kind::Gamma) {
          for (size_t i = 0; i < w.size(); ++i) {
            w[i] += rule.gamma * std::max(w[i], 0.0);
          }
          for (size_t i = 0; i < b.size(); ++i) {
            b[i] += rule.gamma * std::max(b[i], 0.0);
          }
        }
        const Tensor z = lin.fwd(a, w, &b);
        Tensor s(z.shape());
        for (size_t j = 0; j < z.size(); ++j) {
          s[j] = stabilized_share(R[j], z[j], rule.eps, absorbed_);
        }
        const Tensor c = lin.bwd(s, w);
        for (size_t i = 0; i < r_in.size(); ++i) r_in[i] = a[i] * c[i];
        break;
      }
      case LrpRule::Kind::Beta:
      case LrpRule::Kind::AdaptiveBeta: {
        const Tensor wp = pos_part(n.weights), wn = neg_part(n.weights);
        const Tensor ap = pos_part(a), an = neg_part(a);
        // z+ = sum of positive contributions, z- = sum of negative ones
        Tensor zp = lin.fwd(ap, wp, nullptr);
        {
          const Tensor t = lin.fwd(an, wn, nullptr);
          for (size_t j = 0; j < zp.size(); ++j) zp[j] += t[j];
        }
        Tensor zn = lin.fwd(ap, wn, nullptr);
        {
          const Tensor t = lin.fwd(an, wp, nullptr);
          for (size_t j = 0; j < zn.size(); ++j) zn[j] += t[j];
        }
        Tensor sp(zp.shape()), sn(zn.shape());
        for (size_t j = 0; j < zp.size(); ++j) {
          double beta = rule.beta;
          if (rule.kind == LrpRule::Kind::AdaptiveBeta) {
            const double pos = zp[j], neg = -zn[j];
            if (pos + neg <= 0.0) {
              beta = 0.0;
            } else if (cfg_.adaptive_beta_algebraic) {
              beta = pos > neg ? neg / (pos - neg) : rule.cap;
            } else {
              beta = neg / (pos + neg);
            }
            beta = std::min(beta, rule.cap);
          }
          sp[j] = stabilized_share((1.0 + beta) * R[j], zp[j], 0.0, absorbed_);
          sn[j] = stabilized_share(beta * R[j], zn[j], 0.0, absorbed_);
        }
        const Tensor c_sp_wp = lin.bwd(sp, wp);
        const Tensor c_sp_wn = lin.bwd(sp, wn);
        const Tensor c_sn_wp = lin.bwd(sn, wp);
        const Tensor c_sn_wn = lin.bwd(sn, wn);
        for (size_t i = 0; i < r_in.size(); ++i) {
          r_in[i] = ap[i] * c_sp_wp[i] + an[i] * c_sp_wn[i] -
                    ap[i] * c_sn_wn[i] - an[i] * c_sn_wp[i];
        }
        break;
      }
      case LrpRule::Kind::ZBox: {
        const Tensor wp = pos_part(n.weights), wn = neg_part(n.weights);
        Tensor lo(a.shape()), hi(a.shape());
        for (size_t i = 0; i < a.size(); ++i) {
          lo[i] = rule.low;
          hi[i] = rule.high;
        }
        Tensor z = lin.fwd(a, n.weights, nullptr);
        {
          const Tensor zl = lin.fwd(lo, wp, nullptr);
          const Tensor zh = lin.fwd(hi, wn, nullptr);
          for (size_t j = 0; j < z.size(); ++j) z[j] -= zl[j] + zh[j];
        }
        Tensor s(z.shape());
        for (size_t j = 0; j < z.size(); ++j) {
          s[j] = stabilized_share(R[j], z[j], 0.0, absorbed_);
        }
        const Tensor cw = lin.bwd(s, n.weights);
        const Tensor cp = lin.bwd(s, wp);
        const Tensor cn = lin.bwd(s, wn);
        for (size_t i = 0; i < r_in.size(); ++i) {
          r_in[i] = a[i] * cw[i] - lo[i] * cp[i] - hi[i] * cn[i];
        }
        break;
      }
    }
    accumulate(rel[in0], r_in, a.shape());
  }

  const ModelGraph& m_;
  const ForwardResult& fr_;
  const LrpConfig& cfg_;
  std::vector<LrpRule> rules_;
  bool absorbed_ = false;
  int capture_add_ = -1;
  Tensor captured_first_, captured_second_;
};

LrpResult finish(const ModelGraph& m, const std::vector<Tensor>& rel,
                 const LrpEngine& eng, std::string method, std::string target) {
  LrpResult res;
  res.map.values = rel[0].empty() ? Tensor(m.input_shape()) : rel[0];
  res.map.method = std::move(method);
  res.map.target = std::move(target);
  res.absorbed = eng.absorbed();
  for (int id = 0; id < m.node_count(); ++id) {
    res.layer_names.push_back(m.node(id).name);
    res.layer_sums.push_back(rel[id].empty() ? 0.0 : rel[id].sum());
  }
  return res;
}

}  // namespace

LrpResult lrp(const ModelGraph& m, const Tensor& x, int target,
              const LrpConfig& cfg) {
  if (target < 0 || target >= m.logit_count()) {
    throw std::invalid_argument("lrp: target logit out of range");
  }
  const ForwardResult fr = forward(m, x);
  Tensor seed(m.node_shape(m.output_node()));
  seed[target] = fr.logits(m)[target];
  LrpEngine eng(m, fr, cfg);
  const auto rel = eng.propagate({{m.output_node(), seed}});
  return finish(m, rel, eng, cfg.name, "logit:" + std::to_string(target));
}

LrpResult attribute_intermediate(const ModelGraph& m, const Tensor& x,
                                 int node_id, const LrpConfig& cfg) {
  if (node_id < 0 || node_id >= m.node_count()) {
    throw std::invalid_argument("attribute_intermediate: node out of range");
  }
  const ForwardResult fr = forward(m, x);
  // explaining the sum of activations: each unit starts with its own value
  LrpEngine eng(m, fr, cfg);
  const auto rel = eng.propagate({{node_id, fr.acts[node_id]}});
  return finish(m, rel, eng, cfg.name,
                "node:" + m.node(node_id).name + ":sum");
}

SkipSplitResult skip_split(const ModelGraph& m, const Tensor& x, int target,
                           const LrpConfig& cfg, std::optional<int> add_node) {
  const std::vector<int> adds = m.nodes_of_kind(LayerKind::ResidualAdd);
  if (adds.empty()) {
    throw std::invalid_argument("skip_split: model has no residual_add node");
  }
  const int add = add_node.value_or(adds.back());
  if (m.node(add).kind != LayerKind::ResidualAdd) {
    throw std::invalid_argument("skip_split: node '" + m.node(add).name +
                                "' is not a residual_add");
  }
  const ForwardResult fr = forward(m, x);
  Tensor seed(m.node_shape(m.output_node()));
  if (target < 0 || target >= m.logit_count()) {
    throw std::invalid_argument("skip_split: target logit out of range");
  }
  seed[target] = fr.logits(m)[target];

  LrpEngine main_eng(m, fr, cfg);
  main_eng.capture_at(add);
  const auto rel = main_eng.propagate({{m.output_node(), seed}});

  // the skip edge is the add input that is an ancestor of the other one
  const int p = m.node(add).inputs[0], q = m.node(add).inputs[1];
  const bool first_is_skip = !m.is_ancestor(q, p);
  const int skip_in = first_is_skip ? p : q;
  const int weighted_in = first_is_skip ? q : p;
  const Tensor& r_skip =
      first_is_skip ? main_eng.captured_first() : main_eng.captured_second();
  const Tensor& r_weighted =
      first_is_skip ? main_eng.captured_second() : main_eng.captured_first();

  SkipSplitResult out;
  out.add_node = add;
  const std::string tgt = "logit:" + std::to_string(target);
  out.total = {rel[0].empty() ? Tensor(m.input_shape()) : rel[0],
               cfg.name + "+total", tgt, ChannelReduce::None};

  LrpEngine skip_eng(m, fr, cfg);
  const auto skip_rel = skip_eng.propagate({{skip_in, r_skip}});
  out.skip_component = {
      skip_rel[0].empty() ? Tensor(m.input_shape()) : skip_rel[0],
      cfg.name + "+skip", tgt, ChannelReduce::None};

  LrpEngine w_eng(m, fr, cfg);
  const auto w_rel = w_eng.propagate({{weighted_in, r_weighted}});
  out.weighted_component = {
      w_rel[0].empty() ? Tensor(m.input_shape()) : w_rel[0],
      cfg.name + "+weighted", tgt, ChannelReduce::None};
  return out;
}

}  // namespace attrib
