#pragma once

#include <string>

#include "attrib/graph.hpp"

namespace attrib {

/// Writes a model file: a structured-text header (version + graph
/// descriptor), a little-endian float64 parameter blob in node order, and
/// a trailing checksum line over everything before it.
void serialize(const ModelGraph& m, const std::string& path);

/// Round-trips bit-exactly. Throws on version mismatch, checksum failure,
/// truncation or an empty file.
ModelGraph deserialize(const std::string& path);

}  // namespace attrib
