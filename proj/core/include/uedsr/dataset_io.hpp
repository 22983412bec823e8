#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uedsr/sensor_sim.hpp"

namespace uedsr {

// One sample per directory:
//   blurry.png, sharp_000..006.png, attn_000..006.png   16-bit grayscale
//   events_lr.evs, events_hr.evs
//   manifest                                            key = value
void write_sample(const std::filesystem::path& dir, const DatasetSample& sample);
DatasetSample read_sample(const std::filesystem::path& dir);

// Sample directories of <root>/<split>, sorted by name.
std::vector<std::filesystem::path> list_samples(const std::filesystem::path& root, const std::string& split);

std::string sample_id(int index);

}  // namespace uedsr
