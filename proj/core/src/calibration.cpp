#include "uedsr/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "uedsr/errors.hpp"
#include "uedsr/metrics.hpp"

namespace uedsr {

std::string CalibrationResult::to_text() const {
    std::string out;
    char buf[96];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            std::snprintf(buf, sizeof buf, "h%d%d = %.12g\n", r, c, homography(r, c));
            out += buf;
        }
    std::snprintf(buf, sizeof buf, "offset_us = %lld\nscore = %.9g\ninliers = %d\n",
                  static_cast<long long>(temporal_offset), score, inliers);
    out += buf;
    return out;
}

Point2 apply_homography(const Eigen::Matrix3d& h, Point2 p) {
    const Eigen::Vector3d q = h * Eigen::Vector3d(p.x, p.y, 1.0);
    return {q.x() / q.z(), q.y() / q.z()};
}

namespace {

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Eigen::Matrix3d normalizer(std::span<const PointMatch> matches, bool dst) {
    double cx = 0.0, cy = 0.0;
    for (const auto& m : matches) {
        const Point2& p = dst ? m.dst : m.src;
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(matches.size());
    cy /= static_cast<double>(matches.size());
    double dist = 0.0;
    for (const auto& m : matches) {
        const Point2& p = dst ? m.dst : m.src;
        dist += std::hypot(p.x - cx, p.y - cy);
    }
    dist /= static_cast<double>(matches.size());
    if (!(dist > 0.0)) throw DegenerateGeometryError("all points coincide");
    const double s = std::sqrt(2.0) / dist;
    Eigen::Matrix3d t;
    t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return t;
}

double triangle_area2(Point2 a, Point2 b, Point2 c) {
    return std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

bool has_collinear_triple(const std::array<PointMatch, 4>& m, bool dst) {
    auto pt = [&](int i) { return dst ? m[i].dst : m[i].src; };
    double extent = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) extent = std::max(extent, std::hypot(pt(i).x - pt(j).x, pt(i).y - pt(j).y));
    const double tol = 1e-6 * extent * extent;
    static constexpr int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
    for (const auto& t : kTriples)
        if (triangle_area2(pt(t[0]), pt(t[1]), pt(t[2])) <= tol) return true;
    return false;
}

double reprojection_error(const Eigen::Matrix3d& h, const PointMatch& m) {
    const Point2 p = apply_homography(h, m.src);
    const double e = std::hypot(p.x - m.dst.x, p.y - m.dst.y);
    return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::Matrix3d fit_homography(std::span<const PointMatch> matches) {
    if (matches.size() < 4)
        throw DegenerateGeometryError("homography needs at least 4 matches, got " + std::to_string(matches.size()));
    const Eigen::Matrix3d ts = normalizer(matches, false);
    const Eigen::Matrix3d td = normalizer(matches, true);
    Eigen::MatrixXd a(2 * matches.size(), 9);
    for (std::size_t i = 0; i < matches.size(); ++i) {
        const Eigen::Vector3d s = ts * Eigen::Vector3d(matches[i].src.x, matches[i].src.y, 1.0);
        const Eigen::Vector3d d = td * Eigen::Vector3d(matches[i].dst.x, matches[i].dst.y, 1.0);
        const double x = s.x(), y = s.y(), u = d.x(), v = d.y();
        a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    Eigen::Matrix3d out = td.inverse() * hn * ts;
    if (std::abs(out(2, 2)) < 1e-12 * out.norm()) throw DegenerateGeometryError("homography maps the origin to infinity");
    out /= out(2, 2);
    if (!out.allFinite() || std::abs(out.determinant()) < 1e-12) throw DegenerateGeometryError("singular homography");
    return out;
}

CalibrationResult estimate_homography(std::span<const PointMatch> matches, const RansacOptions& options) {
    const std::size_t n = matches.size();
    if (n < 4) throw DegenerateGeometryError("homography needs at least 4 matches, got " + std::to_string(n));
    if (options.iterations < 1) throw RangeError("ransac iterations must be >= 1");
    if (!(options.inlier_threshold_px > 0.0)) throw RangeError("inlier threshold must be > 0");

    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> best;
    double best_error = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> indices(n);
    for (int it = 0; it < options.iterations; ++it) {
        std::array<PointMatch, 4> pick;
        // partial Fisher-Yates on a fresh index list keeps draws independent
        for (std::size_t i = 0; i < n; ++i) indices[i] = i;
        for (std::size_t i = 0; i < 4; ++i) {
            const std::size_t j = i + std::uniform_int_distribution<std::size_t>(0, n - 1 - i)(rng);
            std::swap(indices[i], indices[j]);
            pick[i] = matches[indices[i]];
        }
        if (has_collinear_triple(pick, false) || has_collinear_triple(pick, true)) continue;
        Eigen::Matrix3d h;
        try {
            h = fit_homography(pick);
        } catch (const DegenerateGeometryError&) {
            continue;
        }
        std::vector<std::size_t> inliers;
        double error = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = reprojection_error(h, matches[i]);
            if (e < options.inlier_threshold_px) {
                inliers.push_back(i);
                error += e;
            }
        }
        if (inliers.size() > best.size() || (inliers.size() == best.size() && error < best_error)) {
            best = std::move(inliers);
            best_error = error;
        }
    }
    if (best.size() < 4) throw DegenerateGeometryError("no non-degenerate homography hypothesis found");

    // Refit on the consensus set until it stops changing.
    Eigen::Matrix3d h;
    for (int round = 0; round < 5; ++round) {
        std::vector<PointMatch> subset;
        for (std::size_t i : best) subset.push_back(matches[i]);
        h = fit_homography(subset);
        std::vector<std::size_t> next;
        for (std::size_t i = 0; i < n; ++i)
            if (reprojection_error(h, matches[i]) < options.inlier_threshold_px) next.push_back(i);
        if (next == best || next.size() < 4) break;
        best = std::move(next);
    }
    if (4 * best.size() < n)
        throw DegenerateGeometryError("only " + std::to_string(best.size()) + " of " + std::to_string(n) +
                                      " matches are inliers (need 25%)");
    CalibrationResult out;
    out.homography = h;
    out.inliers = static_cast<int>(best.size());
    return out;
}

Image stack_event_frame(const EventStream& stream, Microseconds t_begin, Microseconds t_end) {
    Image out(stream.width(), stream.height());
    const auto events = stream.events();
    auto lo = std::lower_bound(events.begin(), events.end(), t_begin,
                               [](const Event& e, Microseconds t) { return e.t < t; });
    auto hi = std::upper_bound(lo, events.end(), t_end, [](Microseconds t, const Event& e) { return t < e.t; });
    double peak = 0.0;
    for (auto it = lo; it < hi; ++it) peak = std::max(peak, out.at(it->x, it->y) += 1.0);
    if (peak > 0.0)
        for (double& v : out.pixels()) v /= peak;
    return out;
}

Image gradient_magnitude(const Image& image) {
    const int w = image.width(), h = image.height();
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = (image.at(std::min(x + 1, w - 1), y) - image.at(std::max(x - 1, 0), y)) / 2.0;
            const double gy = (image.at(x, std::min(y + 1, h - 1)) - image.at(x, std::max(y - 1, 0))) / 2.0;
            out.at(x, y) = std::sqrt(gx * gx + gy * gy);
        }
    return out;
}

Image gradient_map(const Image& image) {
    Image out = gradient_magnitude(image);
    double peak = 0.0;
    for (double v : out.pixels()) peak = std::max(peak, v);
    if (peak > 0.0)
        for (double& v : out.pixels()) v /= peak;
    return out;
}

namespace {

void check_temporal_inputs(const EventStream& stream, const FrameSequence& frames) {
    if (stream.empty()) throw InsufficientSignalError("event stream is empty");
    if (frames.size() < 2) throw NeedsTwoFramesError();
    if (frames.width() != stream.width() || frames.height() != stream.height())
        throw GeometryError("frames " + std::to_string(frames.width()) + "x" + std::to_string(frames.height()) +
                            " differ from event geometry " + std::to_string(stream.width()) + "x" +
                            std::to_string(stream.height()));
}

double score_offset(const EventStream& stream, const FrameSequence& frames, const std::vector<Image>& gradients,
                    Microseconds offset) {
    const auto& ts = frames.timestamps();
    const Microseconds interval = (ts.back() - ts.front()) / static_cast<Microseconds>(ts.size() - 1);
    const Microseconds half = interval / 2;
    // frames whose window is cut by the ends of the recording would favour
    // offsets that pull the window back inside it
    double sum = 0.0;
    int used = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const Microseconds centre = ts[i] + offset;
        if (centre - half < stream.t_start() || centre + half > stream.t_end()) continue;
        sum += ssim(stack_event_frame(stream, centre - half, centre + half), gradients[i]);
        ++used;
    }
    return used > 0 ? sum / used : -1.0;
}

std::vector<Image> gradient_maps(const FrameSequence& frames) {
    std::vector<Image> out;
    for (const Image& f : frames.frames()) out.push_back(gradient_map(f));
    return out;
}

}  // namespace

double temporal_alignment_score(const EventStream& stream, const FrameSequence& frames, Microseconds offset) {
    check_temporal_inputs(stream, frames);
    return score_offset(stream, frames, gradient_maps(frames), offset);
}

std::vector<std::pair<Microseconds, double>> temporal_scores(const EventStream& stream, const FrameSequence& frames,
                                                             Microseconds search_range, Microseconds step) {
    check_temporal_inputs(stream, frames);
    if (step <= 0) throw RangeError("search step must be > 0");
    if (search_range < 0) throw RangeError("search range must be >= 0");
    const auto gradients = gradient_maps(frames);
    const Microseconds k = search_range / step;
    std::vector<std::pair<Microseconds, double>> out;
    for (Microseconds i = -k; i <= k; ++i) out.emplace_back(i * step, score_offset(stream, frames, gradients, i * step));
    return out;
}

CalibrationResult estimate_temporal_offset(const EventStream& stream, const FrameSequence& frames,
                                           Microseconds search_range, Microseconds step) {
    auto scores = temporal_scores(stream, frames, search_range, step);
    // visit 0, +s, -s, +2s, -2s, ... so a strict comparison implements the tie rule
    std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
        const auto ma = std::llabs(a.first), mb = std::llabs(b.first);
        return ma != mb ? ma < mb : a.first > b.first;
    });
    CalibrationResult out;
    out.temporal_offset = scores.front().first;
    out.score = scores.front().second;
    for (const auto& [offset, score] : scores)
        if (score > out.score) {
            out.temporal_offset = offset;
            out.score = score;
        }
    return out;
}

}  // namespace uedsr
