#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace uedsr {

using Microseconds = std::int64_t;

struct Event {
    Microseconds t = 0;
    std::int32_t x = 0;
    std::int32_t y = 0;
    std::int8_t p = 1;  // -1 or +1

    friend bool operator==(const Event&, const Event&) = default;
};

// Time-sorted polarity events over a sensor of width x height pixels,
// recorded during the interval [t_start, t_end]. Validated on construction
// and immutable afterwards.
class EventStream {
public:
    EventStream(int width, int height, Microseconds t_start, Microseconds t_end,
                std::vector<Event> events = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    Microseconds t_start() const noexcept { return t_start_; }
    Microseconds t_end() const noexcept { return t_end_; }
    Microseconds duration() const noexcept { return t_end_ - t_start_; }

    std::span<const Event> events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }

    friend bool operator==(const EventStream&, const EventStream&) = default;

private:
    int width_;
    int height_;
    Microseconds t_start_;
    Microseconds t_end_;
    std::vector<Event> events_;
};

// Dense [channels x height x width] grid. Layout is channel-major, then rows.
struct EventTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    EventTensor() = default;
    EventTensor(int channels, int height, int width, double fill = 0.0);

    std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
    double& at(int c, int y, int x) { return values[c * plane() + static_cast<std::size_t>(y) * width + x]; }
    double at(int c, int y, int x) const {
        return values[c * plane() + static_cast<std::size_t>(y) * width + x];
    }

    friend bool operator==(const EventTensor&, const EventTensor&) = default;
};

// Per-pixel weights: kEventWeight where events occurred, kQuietWeight elsewhere.
struct EventMask {
    static constexpr double kEventWeight = 1.0;
    static constexpr double kQuietWeight = 0.1;

    int height = 0;
    int width = 0;
    std::vector<double> weights;

    double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr int kDefaultBins = 8;

// Maps every event (t, x, y, p) to (t, x / rho, y / rho, p). Events that land
// on the same low-resolution pixel are kept as separate events.
EventStream downsample_events(const EventStream& stream, int rho);

// Events with |t_i - t| <= delta_t / 2. The returned interval is the window
// clipped to the stream's exposure interval.
EventStream slice_window(const EventStream& stream, Microseconds t, Microseconds delta_t);

// Signed-polarity voxel grid with bilinear weighting along time.
EventTensor encode_voxel_grid(const EventStream& stream, int bins);

// Concatenation of the time-dependent grid around t (window = fraction of the
// exposure) and the grid of the whole exposure: 2 * bins channels.
EventTensor build_representation(const EventStream& stream, Microseconds t,
                                 double delta_t_fraction, int bins = kDefaultBins);

// Window length used by build_representation for a given fraction.
Microseconds representation_window(const EventStream& stream, double delta_t_fraction);

EventMask event_mask(const EventStream& stream);

// Channel-wise bilinear resampling (half-pixel centres, edge clamped).
EventTensor rescale_tensor(const EventTensor& tensor, double factor);
EventTensor resize_tensor(const EventTensor& tensor, int height, int width);

EventTensor concat_channels(const EventTensor& a, const EventTensor& b);
EventTensor slice_channels(const EventTensor& tensor, int first, int count);

}  // namespace uedsr
