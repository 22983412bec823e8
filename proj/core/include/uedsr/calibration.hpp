#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "uedsr/event_core.hpp"
#include "uedsr/image.hpp"
#include "uedsr/sensor_sim.hpp"

namespace uedsr {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// dst ~ H * src in homogeneous coordinates.
struct PointMatch {
    Point2 src;
    Point2 dst;
};

struct RansacOptions {
    int iterations = 1000;
    double inlier_threshold_px = 1.0;
    std::uint64_t seed = 0;
};

struct CalibrationResult {
    Eigen::Matrix3d homography = Eigen::Matrix3d::Identity();  // h33 == 1
    Microseconds temporal_offset = 0;                          // event time = frame time + offset
    double score = 0.0;                                        // mean SSIM at the chosen offset
    int inliers = 0;                                           // RANSAC consensus size

    // "key = value" lines: h00..h22 row-major, offset_us, score, inliers.
    std::string to_text() const;
};

Point2 apply_homography(const Eigen::Matrix3d& h, Point2 p);

// Least-squares homography from >= 4 matches via the normalized DLT,
// scaled so that h33 == 1.
Eigen::Matrix3d fit_homography(std::span<const PointMatch> matches);

// RANSAC over minimal 4-point fits, then refit on the consensus set.
// Throws DegenerateGeometryError for fewer than 4 matches, when no
// non-degenerate hypothesis exists, or when under 25% of matches are inliers.
CalibrationResult estimate_homography(std::span<const PointMatch> matches, const RansacOptions& options = {});

// Per-pixel count of events with t in [t_begin, t_end], polarity ignored,
// divided by the largest count. Zero image if the window holds no events.
Image stack_event_frame(const EventStream& stream, Microseconds t_begin, Microseconds t_end);

// Central-difference gradient magnitude (borders replicate the edge pixel).
Image gradient_magnitude(const Image& image);
// gradient_magnitude scaled to [0, 1] by its maximum.
Image gradient_map(const Image& image);

// Mean SSIM between the event stack around every frame timestamp + offset
// and that frame's gradient map. The stack spans one mean frame interval
// centred on the shifted timestamp.
double temporal_alignment_score(const EventStream& stream, const FrameSequence& frames, Microseconds offset);

// Scores of every candidate offset k * step with |k * step| <= search_range.
std::vector<std::pair<Microseconds, double>> temporal_scores(const EventStream& stream, const FrameSequence& frames,
                                                             Microseconds search_range, Microseconds step);

// Arg-max of temporal_scores. Ties go to the smaller |offset|, then to the
// positive one. Throws InsufficientSignalError for an empty stream.
CalibrationResult estimate_temporal_offset(const EventStream& stream, const FrameSequence& frames,
                                           Microseconds search_range, Microseconds step);

}  // namespace uedsr
