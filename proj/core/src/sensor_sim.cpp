#include "uedsr/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "uedsr/errors.hpp"

namespace uedsr {

FrameSequence::FrameSequence(std::vector<Image> frames, std::vector<Microseconds> timestamps)
    : frames_(std::move(frames)), timestamps_(std::move(timestamps)) {
    if (frames_.size() != timestamps_.size()) throw ValidationError("frame/timestamp count mismatch");
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        require_same_geometry(frames_[i], frames_.front(), "frame sequence");
        if (i > 0 && timestamps_[i] <= timestamps_[i - 1])
            throw ValidationError("frame timestamps must be strictly increasing");
    }
}

EventStream simulate_events(const FrameSequence& sequence, const SimulatorConfig& config) {
    if (sequence.size() < 2) throw NeedsTwoFramesError();
    if (!(config.contrast_threshold > 0.0)) throw ValidationError("contrast threshold must be positive");
    const int w = sequence.width();
    const int h = sequence.height();
    const std::size_t n = static_cast<std::size_t>(w) * h;

    auto to_log = [&](double v) { return config.use_log ? std::log(v + config.log_eps) : v; };

    std::vector<double> threshold(n, config.contrast_threshold);
    if (config.threshold_sigma > 0.0) {
        std::mt19937_64 rng(config.seed);
        std::normal_distribution<double> jitter(config.contrast_threshold, config.threshold_sigma);
        for (double& c : threshold) c = std::max(jitter(rng), 0.01 * config.contrast_threshold);
    }

    std::vector<double> reference(n);
    std::vector<double> previous(n);
    {
        const auto px = sequence[0].pixels();
        for (std::size_t i = 0; i < n; ++i) reference[i] = previous[i] = to_log(px[i]);
    }

    constexpr double kTolerance = 1e-9;
    std::vector<Event> events;
    std::vector<Event> segment;
    for (std::size_t f = 1; f < sequence.size(); ++f) {
        const Microseconds t0 = sequence.timestamps()[f - 1];
        const Microseconds t1 = sequence.timestamps()[f];
        const double span = static_cast<double>(t1 - t0);
        const auto px = sequence[f].pixels();
        segment.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const double l0 = previous[i];
            const double l1 = to_log(px[i]);
            previous[i] = l1;
            const double delta = l1 - l0;
            if (delta == 0.0) continue;
            const double c = threshold[i];
            const int x = static_cast<int>(i % static_cast<std::size_t>(w));
            const int y = static_cast<int>(i / static_cast<std::size_t>(w));
            const std::int8_t polarity = delta > 0.0 ? 1 : -1;
            double& ref = reference[i];
            while (polarity > 0 ? ref + c <= l1 + kTolerance : ref - c >= l1 - kTolerance) {
                const double level = ref + polarity * c;
                const double tau = std::clamp((level - l0) / delta, 0.0, 1.0);
                segment.push_back({t0 + static_cast<Microseconds>(std::llround(tau * span)), x, y, polarity});
                ref = level;
            }
        }
        std::stable_sort(segment.begin(), segment.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
        events.insert(events.end(), segment.begin(), segment.end());
    }
    return EventStream(w, h, sequence.timestamps().front(), sequence.timestamps().back(), std::move(events));
}

Image synthesize_blur(const std::vector<Image>& frames) {
    if (frames.empty()) throw ValidationError("blur synthesis needs at least one frame");
    Image out(frames.front().width(), frames.front().height());
    auto acc = out.pixels();
    for (const Image& f : frames) {
        require_same_geometry(f, frames.front(), "synthesize_blur");
        const auto px = f.pixels();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += px[i];
    }
    const double inv = static_cast<double>(frames.size());
    for (double& v : acc) v = std::clamp(v / inv, 0.0, 1.0);
    return out;
}

Image synthesize_blur(const FrameSequence& sequence) { return synthesize_blur(sequence.frames()); }

Image make_blur_mask(const Image& blurry, const Image& sharp, double threshold) {
    require_same_geometry(blurry, sharp, "make_blur_mask");
    if (!(threshold >= 0.0 && threshold < 1.0)) throw RangeError("blur mask threshold must lie in [0,1)");
    Image out(blurry.width(), blurry.height());
    const auto b = blurry.pixels();
    const auto s = sharp.pixels();
    auto o = out.pixels();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double d = std::abs(b[i] - s[i]);
        o[i] = d < threshold ? 0.0 : std::min(d, 1.0);
    }
    return out;
}

void validate_sample(const DatasetSample& s) {
    if (s.rho < 1) throw ValidationError("rho must be >= 1");
    if (s.hr_sharp.empty()) throw ValidationError("sample has no sharp frames");
    require_same_geometry(s.hr_blurry, s.hr_sharp[0], "sample blurry vs sharp");
    const int w = s.hr_blurry.width();
    const int h = s.hr_blurry.height();
    if (s.hr_events.width() != w || s.hr_events.height() != h)
        throw ValidationError("hr events geometry differs from image geometry");
    if (s.lr_events.width() * s.rho != w || s.lr_events.height() * s.rho != h)
        throw ValidationError("lr events geometry " + std::to_string(s.lr_events.width()) + "x" +
                              std::to_string(s.lr_events.height()) + " inconsistent with rho=" +
                              std::to_string(s.rho) + " and " + std::to_string(w) + "x" + std::to_string(h));
    if (s.gt_attention.size() != s.hr_sharp.size())
        throw ValidationError("need one attention map per sharp frame");
    for (const Image& a : s.gt_attention) require_same_geometry(a, s.hr_blurry, "attention map");
    for (Microseconds t : s.hr_sharp.timestamps())
        if (t < s.hr_events.t_start() || t > s.hr_events.t_end())
            throw ValidationError("sharp frame timestamp outside exposure");
}

namespace {

enum class ShapeKind { Disc, Box };

struct Shape {
    ShapeKind kind;
    double cx, cy;
    double a, b;  // radius, or half extents
    double angle;
    double intensity;
};

struct Grating {
    double kx, ky, phase, amplitude;
};

struct Texture {
    double base;
    double gx, gy;
    std::vector<Grating> gratings;
    std::vector<Shape> shapes;

    double sample(double u, double v, double w, double h) const {
        double value = base + gx * (u / w - 0.5) + gy * (v / h - 0.5);
        for (const Grating& g : gratings) value += g.amplitude * std::sin(g.kx * u + g.ky * v + g.phase);
        for (const Shape& s : shapes) {
            const double du = u - s.cx;
            const double dv = v - s.cy;
            double dist;
            if (s.kind == ShapeKind::Disc) {
                dist = std::hypot(du, dv) - s.a;
            } else {
                const double c = std::cos(s.angle), sn = std::sin(s.angle);
                const double lu = std::abs(c * du + sn * dv) - s.a;
                const double lv = std::abs(-sn * du + c * dv) - s.b;
                dist = std::max(lu, lv) > 0.0 ? std::hypot(std::max(lu, 0.0), std::max(lv, 0.0))
                                              : std::max(lu, lv);
            }
            const double coverage = std::clamp(0.5 - dist, 0.0, 1.0);
            value = value * (1.0 - coverage) + s.intensity * coverage;
        }
        return std::clamp(value, 0.0, 1.0);
    }
};

struct Motion {
    double dx = 0, dy = 0, rotation = 0, zoom = 0;
};

void check_spec(const SceneSpec& spec) {
    if (spec.rho < 1) throw GeometryError("rho must be >= 1");
    if (spec.width < 4 || spec.height < 4 || spec.width % 4 != 0 || spec.height % 4 != 0)
        throw GeometryError("scene geometry must be divisible by 4");
    if (spec.width % spec.rho != 0 || spec.height % spec.rho != 0)
        throw GeometryError("scene geometry must be divisible by rho");
    if (spec.subframes_per_interval < 1) throw ValidationError("subframes_per_interval must be >= 1");
    if (spec.exposure_us < static_cast<Microseconds>(kLatentFrames - 1) * spec.subframes_per_interval)
        throw ValidationError("exposure too short for the requested subframe count");
    if (spec.n_shapes < 0) throw ValidationError("n_shapes must be >= 0");
    if (spec.n_gratings < 0) throw ValidationError("n_gratings must be >= 0");
    if (spec.n_gratings > 0 && !(spec.min_wavelength_px > 0.0)) throw ValidationError("min_wavelength_px must be > 0");
}

}  // namespace

FrameSequence render_scene_sequence(const SceneSpec& spec, std::uint64_t seed) {
    check_spec(spec);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const double w = spec.width;
    const double h = spec.height;
    Texture texture;
    texture.base = uniform(0.25, 0.55);
    texture.gx = uniform(-0.2, 0.2);
    texture.gy = uniform(-0.2, 0.2);
    for (int i = 0; i < spec.n_gratings; ++i) {
        const double wavelength = uniform(spec.min_wavelength_px, 3.0 * spec.min_wavelength_px);
        const double direction = uniform(0.0, std::numbers::pi);
        const double k = 2.0 * std::numbers::pi / wavelength;
        texture.gratings.push_back({k * std::cos(direction), k * std::sin(direction),
                                    uniform(0.0, 2.0 * std::numbers::pi),
                                    spec.grating_amplitude / std::max(1, spec.n_gratings)});
    }
    for (int i = 0; i < spec.n_shapes; ++i) {
        Shape s;
        s.kind = unit(rng) < 0.5 ? ShapeKind::Disc : ShapeKind::Box;
        s.cx = uniform(-0.1 * w, 1.1 * w);
        s.cy = uniform(-0.1 * h, 1.1 * h);
        const double scale = std::min(w, h);
        s.a = uniform(0.05, 0.2) * scale;
        s.b = uniform(0.05, 0.2) * scale;
        s.angle = uniform(0.0, std::numbers::pi);
        s.intensity = uniform(0.05, 0.95);
        texture.shapes.push_back(s);
    }

    Motion motion;
    if (!spec.zero_velocity) {
        const double heading = uniform(0.0, 2.0 * std::numbers::pi);
        const double magnitude = uniform(0.5, 1.0) * spec.max_displacement_px;
        motion.dx = magnitude * std::cos(heading);
        motion.dy = magnitude * std::sin(heading);
        motion.rotation = uniform(-1.0, 1.0) * spec.max_rotation_deg * std::numbers::pi / 180.0;
        motion.zoom = uniform(-1.0, 1.0) * spec.max_zoom;
    }

    const int intervals = (kLatentFrames - 1) * spec.subframes_per_interval;
    std::vector<Image> frames;
    std::vector<Microseconds> stamps;
    frames.reserve(static_cast<std::size_t>(intervals) + 1);
    const double cx = 0.5 * w;
    const double cy = 0.5 * h;
    for (int j = 0; j <= intervals; ++j) {
        const double tau = static_cast<double>(j) / intervals;
        const double m = tau - 0.5;
        const double theta = m * motion.rotation;
        const double scale = 1.0 + m * motion.zoom;
        const double c = std::cos(theta), s = std::sin(theta);
        const double ox = m * motion.dx, oy = m * motion.dy;
        Image frame(spec.width, spec.height);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const double px = x + 0.5 - cx - ox;
                const double py = y + 0.5 - cy - oy;
                const double u = cx + (c * px + s * py) / scale;
                const double v = cy + (-s * px + c * py) / scale;
                frame.at(x, y) = quantize16(texture.sample(u, v, w, h));
            }
        }
        frames.push_back(std::move(frame));
        stamps.push_back(static_cast<Microseconds>(
            std::llround(static_cast<double>(spec.exposure_us) * j / intervals)));
    }
    return FrameSequence(std::move(frames), std::move(stamps));
}

DatasetSample generate_scene(const SceneSpec& spec, const SimulatorConfig& config) {
    const FrameSequence hr = render_scene_sequence(spec, config.seed);

    std::vector<Image> lr_frames;
    lr_frames.reserve(hr.size());
    for (const Image& f : hr.frames()) lr_frames.push_back(area_downsample(f, spec.rho));
    const FrameSequence lr(std::move(lr_frames), hr.timestamps());

    DatasetSample sample;
    sample.rho = spec.rho;
    sample.seed = config.seed;
    sample.simulator = config;
    sample.hr_events = simulate_events(hr, config);
    sample.lr_events = simulate_events(lr, config);

    std::vector<Image> key_frames;
    std::vector<Microseconds> key_stamps;
    for (int i = 0; i < kLatentFrames; ++i) {
        const auto j = static_cast<std::size_t>(i * spec.subframes_per_interval);
        key_frames.push_back(hr[j]);
        key_stamps.push_back(hr.timestamps()[j]);
    }
    sample.hr_blurry = quantize16(synthesize_blur(key_frames));
    for (const Image& k : key_frames)
        sample.gt_attention.push_back(quantize16(make_blur_mask(sample.hr_blurry, k, spec.blur_mask_threshold)));
    sample.hr_sharp = FrameSequence(std::move(key_frames), std::move(key_stamps));
    validate_sample(sample);
    return sample;
}

}  // namespace uedsr
