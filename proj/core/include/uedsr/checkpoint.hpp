#pragma once

#include <filesystem>

#include "uedsr/config_file.hpp"
#include "uedsr/network.hpp"

namespace uedsr {

// Checkpoint container, little-endian:
//   "CZN1" | u32 version | u32 n | n bytes of "key = value" network config
//   u32 count | count x { u32 len | name | u32 ndim | ndim x u32 | u8 dtype (0 = f32) | u64 bytes | data }
// The file is written to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const ModelState<float>& state);
ModelState<float> load_checkpoint(const std::filesystem::path& path);

// NetworkConfig <-> "key = value" fields (base_channels, bins, rho, ...).
void store_network_config(KeyValueConfig& out, const NetworkConfig& config);
NetworkConfig load_network_config(const KeyValueConfig& in, NetworkConfig defaults = {});

}  // namespace uedsr
