// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "salatt/param_store.hpp"

namespace salatt {

// Checkpoint: "SALATTC1", u32 LE tensor count, then per tensor u32 name
// length, name bytes, u32 rank, rank × u32 dims, f64 LE values. Tensors are
// written in name order.
inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'L', 'A', 'T', 'T', 'C', '1'};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);

/// Values only; accumulators of the loaded store are zero. Throws
/// FormatError on a malformed file.
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace salatt
