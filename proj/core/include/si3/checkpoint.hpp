#pragma once

#include <filesystem>

#include "si3/dmgmm.hpp"

// Binary model checkpoints: the 8-byte magic "SI3CKPT1", a format version,
// then every network's layer dims, output heads and flat parameters, followed
// by the mixture prior. Multi-byte values are written in host byte order.
namespace si3 {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const DmgmmModel& model);
DmgmmModel load_checkpoint(const std::filesystem::path& path);

}  // namespace si3
