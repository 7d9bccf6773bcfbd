#include "attrib/model_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace attrib {

namespace {

constexpr const char* kMagic = "attrib-model v1";

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

void append_f64_le(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

double read_f64_le(const char* p) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

nlohmann::json describe(const ModelGraph& m) {
  nlohmann::json j;
  j["input_shape"] = m.input_shape();
  j["output_node"] = m.output_node();
  if (m.split_marker()) j["split_marker"] = *m.split_marker();
  nlohmann::json nodes = nlohmann::json::array();
  for (int id = 0; id < m.node_count(); ++id) {
    const LayerSpec& n = m.node(id);
    nlohmann::json nj;
    nj["kind"] = layer_kind_name(n.kind);
    nj["name"] = n.name;
    nj["inputs"] = n.inputs;
    if (n.kernel) nj["kernel"] = n.kernel;
    if (n.stride != 1) nj["stride"] = n.stride;
    if (n.pad) nj["pad"] = n.pad;
    if (n.in_channels) nj["in_channels"] = n.in_channels;
    if (n.out_channels) nj["out_channels"] = n.out_channels;
    if (n.fan_in) nj["fan_in"] = n.fan_in;
    if (n.fan_out) nj["fan_out"] = n.fan_out;
    if (n.kind == LayerKind::BiasOnly) nj["bias_shape"] = n.bias.shape();
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

LayerKind kind_from_name(const std::string& s) {
  for (LayerKind k :
       {LayerKind::Input, LayerKind::Dense, LayerKind::Conv2D,
        LayerKind::AvgPool, LayerKind::MaxPool, LayerKind::ReLU,
        LayerKind::ResidualAdd, LayerKind::Flatten, LayerKind::BiasOnly}) {
    if (layer_kind_name(k) == s) return k;
  }
  throw std::runtime_error("model file: unknown layer kind '" + s + "'");
}

}  // namespace

void serialize(const ModelGraph& m, const std::string& path) {
  std::string blob;
  blob.reserve(m.param_count() * 8);
  for (int id = 0; id < m.node_count(); ++id) {
    const LayerSpec& n = m.node(id);
    for (size_t i = 0; i < n.weights.size(); ++i) append_f64_le(blob, n.weights[i]);
    for (size_t i = 0; i < n.bias.size(); ++i) append_f64_le(blob, n.bias[i]);
  }

  std::string body;
  body += kMagic;
  body += "\n";
  body += "meta ";
  body += describe(m).dump();
  body += "\n";
  body += "params " + std::to_string(m.param_count()) + "\n";
  body += blob;

  std::ostringstream check;
  check << "fnv1a64 " << std::hex << fnv1a64(body) << "\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("serialize: cannot open " + path);
  out << body << check.str();
  if (!out) throw std::runtime_error("serialize: write failed for " + path);
}

ModelGraph deserialize(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("deserialize: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string all = ss.str();
  if (all.empty()) throw std::runtime_error("deserialize: empty file " + path);

  size_t pos = all.find('\n');
  if (pos == std::string::npos || all.substr(0, pos) != kMagic) {
    throw std::runtime_error("deserialize: version mismatch in " + path);
  }
  size_t meta_end = all.find('\n', pos + 1);
  if (meta_end == std::string::npos) {
    throw std::runtime_error("deserialize: truncated header in " + path);
  }
  const std::string meta_line = all.substr(pos + 1, meta_end - pos - 1);
  if (meta_line.rfind("meta ", 0) != 0) {
    throw std::runtime_error("deserialize: malformed header in " + path);
  }
  size_t params_end = all.find('\n', meta_end + 1);
  if (params_end == std::string::npos) {
    throw std::runtime_error("deserialize: truncated header in " + path);
  }
  const std::string params_line =
      all.substr(meta_end + 1, params_end - meta_end - 1);
  if (params_line.rfind("params ", 0) != 0) {
    throw std::runtime_error("deserialize: malformed header in " + path);
  }
  const size_t n_params = std::stoull(params_line.substr(7));
  const size_t blob_begin = params_end + 1;
  const size_t blob_end = blob_begin + n_params * 8;
  if (blob_end > all.size()) {
    throw std::runtime_error("deserialize: truncated parameter blob in " +
                             path);
  }
  // checksum covers everything before its own line
  const std::string check_line = all.substr(blob_end);
  if (check_line.rfind("fnv1a64 ", 0) != 0) {
    throw std::runtime_error("deserialize: missing checksum in " + path);
  }
  const uint64_t stored = std::stoull(check_line.substr(8), nullptr, 16);
  if (stored != fnv1a64(all.substr(0, blob_end))) {
    throw std::runtime_error("deserialize: checksum failure in " + path);
  }

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(meta_line.substr(5));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("deserialize: bad metadata in " + path + ": " +
                             e.what());
  }

  std::vector<LayerSpec> nodes;
  for (const auto& nj : j.at("nodes")) {
    LayerSpec n;
    n.kind = kind_from_name(nj.at("kind").get<std::string>());
    n.name = nj.at("name").get<std::string>();
    n.inputs = nj.at("inputs").get<std::vector<int>>();
    n.kernel = nj.value("kernel", 0);
    n.stride = nj.value("stride", 1);
    n.pad = nj.value("pad", 0);
    n.in_channels = nj.value("in_channels", 0);
    n.out_channels = nj.value("out_channels", 0);
    n.fan_in = nj.value("fan_in", 0);
    n.fan_out = nj.value("fan_out", 0);
    if (n.kind == LayerKind::Dense) {
      n.weights = Tensor({static_cast<size_t>(n.fan_out),
                          static_cast<size_t>(n.fan_in)});
      n.bias = Tensor({static_cast<size_t>(n.fan_out)});
    } else if (n.kind == LayerKind::Conv2D) {
      n.weights = Tensor({static_cast<size_t>(n.out_channels),
                          static_cast<size_t>(n.in_channels),
                          static_cast<size_t>(n.kernel),
                          static_cast<size_t>(n.kernel)});
      n.bias = Tensor({static_cast<size_t>(n.out_channels)});
    } else if (n.kind == LayerKind::BiasOnly) {
      n.bias = Tensor(nj.at("bias_shape").get<std::vector<size_t>>());
    }
    nodes.push_back(std::move(n));
  }
  ModelGraph m(j.at("input_shape").get<std::vector<size_t>>(),
               std::move(nodes), j.at("output_node").get<int>());
  if (j.contains("split_marker")) {
    m.set_split_marker(j.at("split_marker").get<int>());
  }

  const char* p = all.data() + blob_begin;
  size_t consumed = 0;
  for (int id = 0; id < m.node_count(); ++id) {
    LayerSpec& n = m.mutable_node(id);
    for (size_t i = 0; i < n.weights.size(); ++i, ++consumed) {
      n.weights[i] = read_f64_le(p + consumed * 8);
    }
    for (size_t i = 0; i < n.bias.size(); ++i, ++consumed) {
      n.bias[i] = read_f64_le(p + consumed * 8);
    }
  }
  if (consumed != n_params) {
    throw std::runtime_error("deserialize: parameter count mismatch in " +
                             path);
  }
  return m;
}

}  // namespace attrib
