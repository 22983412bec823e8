#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "uedsr/calibration.hpp"
#include "uedsr/event_core.hpp"
#include "uedsr/image.hpp"
#include "uedsr/sensor_sim.hpp"

namespace uedsr::testing {

// Sorted random stream; timestamps uniform in [t_start, t_end].
inline EventStream random_stream(std::mt19937_64& rng, int width, int height, int max_events,
                                 Microseconds t_start = 0, Microseconds t_end = 0) {
    if (t_end <= t_start) t_end = t_start + std::uniform_int_distribution<Microseconds>(1, 100'000)(rng);
    const int n = std::uniform_int_distribution<int>(0, max_events)(rng);
    std::vector<Event> events(n);
    for (Event& e : events) {
        e.t = std::uniform_int_distribution<Microseconds>(t_start, t_end)(rng);
        e.x = std::uniform_int_distribution<int>(0, width - 1)(rng);
        e.y = std::uniform_int_distribution<int>(0, height - 1)(rng);
        e.p = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    return EventStream(width, height, t_start, t_end, std::move(events));
}

inline Image random_image(std::mt19937_64& rng, int width, int height, double lo = 0.0, double hi = 1.0) {
    Image img(width, height);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : img.pixels()) v = u(rng);
    return img;
}

// Gaussian blobs drifting at one common constant velocity. `fine` is rendered
// `subframes` times per interval; `frames` holds every interval.
struct DriftScene {
    FrameSequence fine;
    FrameSequence frames;
};

inline DriftScene drifting_blobs(std::mt19937_64& rng, int width, int height, int n_frames, Microseconds interval,
                                 int subframes, double speed_px = 0.7) {
    struct Blob {
        double x, y, sigma, amplitude;
    };
    const double angle = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(rng);
    const double vx = speed_px * std::cos(angle), vy = speed_px * std::sin(angle);
    const double margin = speed_px * n_frames;
    std::vector<Blob> blobs(static_cast<std::size_t>((width + 2 * margin) * (height + 2 * margin) / 60));
    for (Blob& b : blobs) {
        b.x = std::uniform_real_distribution<double>(-margin, width + margin)(rng);
        b.y = std::uniform_real_distribution<double>(-margin, height + margin)(rng);
        b.sigma = std::uniform_real_distribution<double>(1.2, 2.5)(rng);
        b.amplitude = std::uniform_real_distribution<double>(0.2, 0.6)(rng);
    }
    auto render = [&](double time) {
        Image img(width, height, 0.1);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                for (const Blob& b : blobs) {
                    const double dx = x - (b.x + vx * time), dy = y - (b.y + vy * time);
                    img.at(x, y) += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma));
                }
        return img;
    };
    std::vector<Image> fine, coarse;
    std::vector<Microseconds> fine_t, coarse_t;
    for (int i = 0; i <= (n_frames - 1) * subframes; ++i) {
        fine.push_back(render(static_cast<double>(i) / subframes));
        fine_t.push_back(i * interval / subframes);
        if (i % subframes == 0) {
            coarse.push_back(fine.back());
            coarse_t.push_back(fine_t.back());
        }
    }
    return {FrameSequence(std::move(fine), std::move(fine_t)), FrameSequence(std::move(coarse), std::move(coarse_t))};
}

inline EventStream shift_stream(const EventStream& s, Microseconds delta) {
    std::vector<Event> events(s.events().begin(), s.events().end());
    for (Event& e : events) e.t += delta;
    return EventStream(s.width(), s.height(), s.t_start() + delta, s.t_end() + delta, std::move(events));
}

// Rotation up to max_rotation_deg, translation up to max_translation px and
// mild projective terms.
inline Eigen::Matrix3d random_homography(std::mt19937_64& rng, double max_rotation_deg = 10.0,
                                         double max_translation = 20.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a = u(rng) * max_rotation_deg * std::numbers::pi / 180.0;
    const double s = 1.0 + 0.05 * u(rng);
    Eigen::Matrix3d h;
    h << s * std::cos(a), -s * std::sin(a), max_translation * u(rng), s * std::sin(a), s * std::cos(a),
        max_translation * u(rng), 2e-4 * u(rng), 2e-4 * u(rng), 1.0;
    return h;
}

// n matches of points in [0, extent)^2; a fraction of them are replaced by
// gross outliers and inliers receive Gaussian noise of the given sigma.
inline std::vector<PointMatch> synthetic_matches(std::mt19937_64& rng, const Eigen::Matrix3d& h, int n,
                                                 double outlier_fraction, double noise_sigma, double extent = 256.0) {
    std::uniform_real_distribution<double> u(0.0, extent);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0 ? noise_sigma : 1.0);
    const int outliers = static_cast<int>(std::lround(n * outlier_fraction));
    std::vector<PointMatch> out;
    for (int i = 0; i < n; ++i) {
        PointMatch m;
        m.src = {u(rng), u(rng)};
        if (i < outliers) {
            m.dst = {u(rng), u(rng)};
        } else {
            m.dst = apply_homography(h, m.src);
            if (noise_sigma > 0) {
                m.dst.x += noise(rng);
                m.dst.y += noise(rng);
            }
        }
        out.push_back(m);
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

inline double max_corner_error(const Eigen::Matrix3d& truth, const Eigen::Matrix3d& estimate, double extent = 256.0) {
    double worst = 0.0;
    for (Point2 c : {Point2{0, 0}, Point2{extent, 0}, Point2{0, extent}, Point2{extent, extent}}) {
        const Point2 a = apply_homography(truth, c), b = apply_homography(estimate, c);
        worst = std::max(worst, std::hypot(a.x - b.x, a.y - b.y));
    }
    return worst;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("uedsr_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace uedsr::testing
