#pragma once

#include <filesystem>
#include <optional>

#include "uedsr/event_core.hpp"

namespace uedsr {

// ".evs" binary layout, little-endian:
//   "EVS1" | u32 width | u32 height | u64 t_start | u64 t_end | u64 count
//   count x { u64 t | u16 x | u16 y | i8 p | u8 pad }
void write_evs(const std::filesystem::path& path, const EventStream& stream);
EventStream read_evs(const std::filesystem::path& path);

struct CsvGeometry {
    int width = 0;
    int height = 0;
    Microseconds t_start = 0;
    Microseconds t_end = 0;
};

// Plain-text "t,x,y,p" rows. Blank lines and '#' comments are skipped; a
// "t,x,y,p" header row is tolerated. Without an explicit geometry the sensor
// size is inferred from the largest coordinates and the interval from the
// first and last timestamps.
EventStream read_events_csv(const std::filesystem::path& path,
                            std::optional<CsvGeometry> geometry = std::nullopt);
void write_events_csv(const std::filesystem::path& path, const EventStream& stream);

}  // namespace uedsr
