#pragma once

#include <string>

#include "attrib/zoo.hpp"

namespace attrib {

/// Loads an IDX image/label file pair (big-endian magics 0x00000803 and
/// 0x00000801). Pixel bytes are scaled to [0,1]; images come out (N,1,H,W).
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

}  // namespace attrib
