#include "uedsr/event_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uedsr/errors.hpp"

namespace uedsr {

EventStream::EventStream(int width, int height, Microseconds t_start, Microseconds t_end,
                         std::vector<Event> events)
    : width_(width), height_(height), t_start_(t_start), t_end_(t_end), events_(std::move(events)) {
    if (width < 1 || height < 1) throw GeometryError("event stream needs width, height >= 1");
    if (t_end < t_start) throw RangeError("event stream interval ends before it starts");
    Microseconds previous = t_start;
    for (const Event& e : events_) {
        if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
            throw GeometryError("event at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                                ") outside " + std::to_string(width) + "x" + std::to_string(height));
        }
        if (e.p != 1 && e.p != -1) throw ValidationError("event polarity must be -1 or +1");
        if (e.t < previous) throw ValidationError("events not sorted by timestamp");
        if (e.t > t_end) throw RangeError("event timestamp beyond end of interval");
        previous = e.t;
    }
}

EventTensor::EventTensor(int c, int h, int w, double fill)
    : channels(c), height(h), width(w),
      values(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

EventStream downsample_events(const EventStream& stream, int rho) {
    if (rho < 1) throw GeometryError("downsampling factor must be >= 1");
    if (stream.width() % rho != 0 || stream.height() % rho != 0) {
        throw GeometryError("stream " + std::to_string(stream.width()) + "x" +
                            std::to_string(stream.height()) + " not divisible by rho=" +
                            std::to_string(rho));
    }
    std::vector<Event> out(stream.events().begin(), stream.events().end());
    for (Event& e : out) {
        e.x /= rho;
        e.y /= rho;
    }
    return EventStream(stream.width() / rho, stream.height() / rho, stream.t_start(), stream.t_end(),
                       std::move(out));
}

EventStream slice_window(const EventStream& stream, Microseconds t, Microseconds delta_t) {
    if (t < stream.t_start() || t > stream.t_end()) {
        throw RangeError("window centre " + std::to_string(t) + " outside [" +
                         std::to_string(stream.t_start()) + ", " + std::to_string(stream.t_end()) + "]");
    }
    if (delta_t < 0) throw RangeError("negative window length");
    const Microseconds half = delta_t / 2;
    const auto events = stream.events();
    auto first = std::lower_bound(events.begin(), events.end(), t - half,
                                  [](const Event& e, Microseconds v) { return e.t < v; });
    auto last = std::upper_bound(events.begin(), events.end(), t + half,
                                 [](Microseconds v, const Event& e) { return v < e.t; });
    return EventStream(stream.width(), stream.height(), std::max(stream.t_start(), t - half),
                       std::min(stream.t_end(), t + half), std::vector<Event>(first, last));
}

EventTensor encode_voxel_grid(const EventStream& stream, int bins) {
    if (bins < 1) throw ValidationError("voxel grid needs at least one bin");
    EventTensor grid(bins, stream.height(), stream.width());
    const double span = static_cast<double>(stream.duration());
    const double scale = span > 0.0 ? (bins - 1) / span : 0.0;
    for (const Event& e : stream.events()) {
        const double tn = scale * static_cast<double>(e.t - stream.t_start());
        const int lower = static_cast<int>(std::floor(tn));
        for (int b = lower; b <= lower + 1; ++b) {
            if (b < 0 || b >= bins) continue;
            const double weight = std::max(0.0, 1.0 - std::abs(b - tn));
            if (weight > 0.0) grid.at(b, e.y, e.x) += e.p * weight;
        }
    }
    return grid;
}

Microseconds representation_window(const EventStream& stream, double delta_t_fraction) {
    if (!(delta_t_fraction > 0.0 && delta_t_fraction <= 1.0)) {
        throw RangeError("delta_t fraction must lie in (0, 1]");
    }
    return static_cast<Microseconds>(std::llround(delta_t_fraction * static_cast<double>(stream.duration())));
}

EventTensor build_representation(const EventStream& stream, Microseconds t, double delta_t_fraction,
                                 int bins) {
    const Microseconds window = representation_window(stream, delta_t_fraction);
    return concat_channels(encode_voxel_grid(slice_window(stream, t, window), bins),
                           encode_voxel_grid(stream, bins));
}

EventMask event_mask(const EventStream& stream) {
    EventMask mask;
    mask.height = stream.height();
    mask.width = stream.width();
    mask.weights.assign(static_cast<std::size_t>(mask.height) * mask.width, EventMask::kQuietWeight);
    for (const Event& e : stream.events())
        mask.weights[static_cast<std::size_t>(e.y) * mask.width + e.x] = EventMask::kEventWeight;
    return mask;
}

namespace {

int scaled_extent(int extent, double factor, const char* axis) {
    const double scaled = extent * factor;
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-9 || rounded < 1.0) {
        throw GeometryError(std::string("rescale: non-integral output ") + axis + " (" +
                            std::to_string(scaled) + ")");
    }
    return static_cast<int>(rounded);
}

struct Tap {
    int lo;
    int hi;
    double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double ratio = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        const double src = std::max(0.0, (i + 0.5) * ratio - 0.5);
        const int lo = std::min(static_cast<int>(std::floor(src)), in - 1);
        taps[i] = {lo, std::min(lo + 1, in - 1), src - lo};
    }
    return taps;
}

}  // namespace

EventTensor resize_tensor(const EventTensor& tensor, int height, int width) {
    if (height < 1 || width < 1) throw GeometryError("resize to empty geometry");
    if (height == tensor.height && width == tensor.width) return tensor;
    const auto ty = bilinear_taps(tensor.height, height);
    const auto tx = bilinear_taps(tensor.width, width);
    EventTensor out(tensor.channels, height, width);
    for (int c = 0; c < tensor.channels; ++c) {
        for (int y = 0; y < height; ++y) {
            const Tap& a = ty[y];
            for (int x = 0; x < width; ++x) {
                const Tap& b = tx[x];
                const double top = tensor.at(c, a.lo, b.lo) * (1.0 - b.frac) + tensor.at(c, a.lo, b.hi) * b.frac;
                const double bot = tensor.at(c, a.hi, b.lo) * (1.0 - b.frac) + tensor.at(c, a.hi, b.hi) * b.frac;
                out.at(c, y, x) = top * (1.0 - a.frac) + bot * a.frac;
            }
        }
    }
    return out;
}

EventTensor rescale_tensor(const EventTensor& tensor, double factor) {
    if (!(factor > 0.0)) throw GeometryError("rescale factor must be positive");
    return resize_tensor(tensor, scaled_extent(tensor.height, factor, "height"),
                         scaled_extent(tensor.width, factor, "width"));
}

EventTensor concat_channels(const EventTensor& a, const EventTensor& b) {
    if (a.height != b.height || a.width != b.width) throw GeometryError("concat: geometry mismatch");
    EventTensor out(a.channels + b.channels, a.height, a.width);
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(a.values.size()));
    return out;
}

EventTensor slice_channels(const EventTensor& tensor, int first, int count) {
    if (first < 0 || count < 0 || first + count > tensor.channels) throw RangeError("channel slice out of range");
    EventTensor out(count, tensor.height, tensor.width);
    const auto begin = tensor.values.begin() + static_cast<std::ptrdiff_t>(first * tensor.plane());
    std::copy(begin, begin + static_cast<std::ptrdiff_t>(count * tensor.plane()), out.values.begin());
    return out;
}

}  // namespace uedsr
