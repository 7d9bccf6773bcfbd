#include "attrib/attribution.hpp"

#include <cmath>
#include <stdexcept>

#include "attrib/rng.hpp"

namespace attrib {

std::string channel_reduce_name(ChannelReduce r) {
  switch (r) {
    case ChannelReduce::None: return "none";
    case ChannelReduce::Sum: return "sum";
    case ChannelReduce::AbsSum: return "abs_sum";
    case ChannelReduce::L2: return "l2";
  }
  return "?";
}

namespace {
std::string logit_target(int t) { return "logit:" + std::to_string(t); }
}  // namespace

AttributionMap gradient(const ModelGraph& m, const Tensor& x, int target) {
  return {backward_vjp(m, x, target), "gradient", logit_target(target),
          ChannelReduce::None};
}

AttributionMap gradient_x_input(const ModelGraph& m, const Tensor& x,
                                int target) {
  Tensor g = backward_vjp(m, x, target);
  for (size_t i = 0; i < g.size(); ++i) g[i] *= x[i];
  return {std::move(g), "gxi", logit_target(target), ChannelReduce::None};
}

AttributionMap integrated_gradients(const ModelGraph& m, const Tensor& x,
                                    const Tensor& baseline, int steps,
                                    int target) {
  if (!baseline.same_shape(x)) {
    throw std::invalid_argument("integrated_gradients: baseline shape " +
                                shape_str(baseline.shape()) +
                                " does not match input " +
                                shape_str(x.shape()));
  }
  if (steps < 1) {
    throw std::invalid_argument("integrated_gradients: steps must be >= 1");
  }
  Tensor acc(x.shape());
  for (int t = 0; t < steps; ++t) {
    // midpoint Riemann sum along the straight path
    const double alpha = (t + 0.5) / static_cast<double>(steps);
    Tensor xt(x.shape());
    for (size_t i = 0; i < x.size(); ++i) {
      xt[i] = baseline[i] + alpha * (x[i] - baseline[i]);
    }
    const Tensor g = backward_vjp(m, xt, target);
    for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(steps);
  for (size_t i = 0; i < acc.size(); ++i) {
    acc[i] = (x[i] - baseline[i]) * acc[i] * inv;
  }
  return {std::move(acc), "ig", logit_target(target), ChannelReduce::None};
}

AttributionMap smoothgrad(const ModelGraph& m, const Tensor& x, double sigma,
                          int n_samples, int target, uint64_t seed) {
  if (n_samples < 1) {
    throw std::invalid_argument("smoothgrad: n_samples must be >= 1");
  }
  if (sigma <= 0.0) {  // all samples coincide with x
    return {backward_vjp(m, x, target), "smoothgrad", logit_target(target),
            ChannelReduce::None};
  }
  Tensor acc(x.shape());
  for (int s = 0; s < n_samples; ++s) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(s)));
    Tensor xs = x;
    if (sigma > 0.0) {
      for (size_t i = 0; i < xs.size(); ++i) xs[i] += sigma * rng.normal();
    }
    const Tensor g = backward_vjp(m, xs, target);
    for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(n_samples);
  for (size_t i = 0; i < acc.size(); ++i) acc[i] *= inv;
  return {std::move(acc), "smoothgrad", logit_target(target),
          ChannelReduce::None};
}

AttributionMap guided_backprop(const ModelGraph& m, const Tensor& x,
                               int target) {
  return {backward_guided(m, x, target), "gb", logit_target(target),
          ChannelReduce::None};
}

AttributionMap reduce_channels(const AttributionMap& map, ChannelReduce mode) {
  AttributionMap out;
  out.method = map.method;
  out.target = map.target;
  out.reduce = mode;
  const Tensor& v = map.values;
  if (mode == ChannelReduce::None || v.rank() < 3) {
    out.values = v;
    return out;
  }
  const size_t c = v.shape()[0];
  const size_t plane = v.size() / c;
  std::vector<double> r(plane, 0.0);
  for (size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (size_t ch = 0; ch < c; ++ch) {
      const double x = v[ch * plane + i];
      switch (mode) {
        case ChannelReduce::Sum: acc += x; break;
        case ChannelReduce::AbsSum: acc += std::fabs(x); break;
        case ChannelReduce::L2: acc += x * x; break;
        case ChannelReduce::None: break;
      }
    }
    r[i] = mode == ChannelReduce::L2 ? std::sqrt(acc) : acc;
  }
  std::vector<size_t> shape(v.shape().begin() + 1, v.shape().end());
  out.values = Tensor(shape, std::move(r));
  return out;
}

}  // namespace attrib
