#pragma once

#include <string>
#include <vector>

namespace attrib {

/// Dispatches `train | sanity | faithfulness | theory | stats` with flags
/// `--config PATH --seed N --out DIR --threads N`. Returns the process
/// exit code: 0 on success, 1 when some requested cells failed (failures
/// are listed on stderr), 2 on usage/config errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace attrib
