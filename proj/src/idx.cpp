#include "attrib/idx.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace attrib {

namespace {

uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("idx: truncated file " + path);
  }
  return (static_cast<uint32_t>(b[0]) << 24) |
         (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  if (const uint32_t magic = read_u32_be(img, images_path);
      magic != 0x00000803u) {
    throw std::runtime_error("idx: wrong image magic in " + images_path);
  }
  const uint32_t n = read_u32_be(img, images_path);
  const uint32_t h = read_u32_be(img, images_path);
  const uint32_t w = read_u32_be(img, images_path);
  std::vector<unsigned char> pixels(static_cast<size_t>(n) * h * w);
  if (!img.read(reinterpret_cast<char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size()))) {
    throw std::runtime_error("idx: truncated pixel data in " + images_path);
  }

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);
  if (const uint32_t magic = read_u32_be(lab, labels_path);
      magic != 0x00000801u) {
    throw std::runtime_error("idx: wrong label magic in " + labels_path);
  }
  const uint32_t n_labels = read_u32_be(lab, labels_path);
  if (n_labels != n) {
    throw std::runtime_error("idx: image/label count mismatch (" +
                             std::to_string(n) + " vs " +
                             std::to_string(n_labels) + ")");
  }
  std::vector<unsigned char> raw_labels(n_labels);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                static_cast<std::streamsize>(raw_labels.size()))) {
    throw std::runtime_error("idx: truncated label data in " + labels_path);
  }

  std::vector<double> values(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) {
    values[i] = static_cast<double>(pixels[i]) / 255.0;
  }
  Dataset d;
  d.images = Tensor({n, 1, h, w}, std::move(values));
  d.labels.assign(raw_labels.begin(), raw_labels.end());
  d.classes =
      d.labels.empty()
          ? 0
          : 1 + *std::max_element(d.labels.begin(), d.labels.end());
  d.provenance = "idx-file";
  d.validate();
  return d;
}

}  // namespace attrib
