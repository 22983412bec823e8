#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "uedsr/config_file.hpp"
#include "uedsr/network.hpp"
#include "uedsr/sensor_sim.hpp"
#include "uedsr/training.hpp"

namespace uedsr::cli {

// Everything a run can be configured with. One file may serve every
// subcommand; each reads the sections it needs.
struct RunConfig {
    SceneSpec scene;
    SimulatorConfig simulator;
    NetworkConfig network;
    TrainConfig train;
    int train_samples = 4;
    int test_samples = 2;
    std::uint64_t seed = 0;
};

// Defaults, overridden by the file (if any) and then by --seed. Unknown keys
// are a ValidationError.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, std::optional<std::uint64_t> seed);

// The effective configuration as "key = value" text.
KeyValueConfig dump_run_config(const RunConfig& config);

}  // namespace uedsr::cli
