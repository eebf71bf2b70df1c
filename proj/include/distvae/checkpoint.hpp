#pragma once

#include "distvae/model.hpp"

#include <string>

namespace distvae {

/// Versioned JSON document. Floats are written in shortest round-trip form,
/// so save -> load -> save is byte-identical.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace distvae
