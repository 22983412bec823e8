#pragma once

#include <cstdint>
#include <vector>

#include "uedsr/event_core.hpp"
#include "uedsr/image.hpp"

namespace uedsr {

// Ordered grayscale frames with strictly increasing timestamps.
class FrameSequence {
public:
    FrameSequence() = default;
    FrameSequence(std::vector<Image> frames, std::vector<Microseconds> timestamps);

    int width() const noexcept { return frames_.empty() ? 0 : frames_.front().width(); }
    int height() const noexcept { return frames_.empty() ? 0 : frames_.front().height(); }
    std::size_t size() const noexcept { return frames_.size(); }
    bool empty() const noexcept { return frames_.empty(); }

    const std::vector<Image>& frames() const noexcept { return frames_; }
    const std::vector<Microseconds>& timestamps() const noexcept { return timestamps_; }
    const Image& operator[](std::size_t i) const { return frames_[i]; }

    friend bool operator==(const FrameSequence&, const FrameSequence&) = default;

private:
    std::vector<Image> frames_;
    std::vector<Microseconds> timestamps_;
};

struct SimulatorConfig {
    double contrast_threshold = 0.2;  // log-intensity step per event
    double log_eps = 1e-3;            // L = log(I + log_eps)
    bool use_log = true;              // false: frame values already are log intensities
    double threshold_sigma = 0.0;     // per-pixel Gaussian jitter of the threshold; 0 disables
    std::uint64_t seed = 0;

    friend bool operator==(const SimulatorConfig&, const SimulatorConfig&) = default;
};

// Idealised event camera: per-pixel log intensity is linearly interpolated
// between consecutive frames and one event is emitted at each crossing of
// reference +/- C, after which the reference moves by C. Output covers
// [first timestamp, last timestamp].
EventStream simulate_events(const FrameSequence& sequence, const SimulatorConfig& config);

// Pixelwise mean of all frames.
Image synthesize_blur(const FrameSequence& sequence);
Image synthesize_blur(const std::vector<Image>& frames);

// |blurry - sharp| with values below threshold zeroed, clamped to [0,1].
Image make_blur_mask(const Image& blurry, const Image& sharp, double threshold);

inline constexpr int kLatentFrames = 7;
inline constexpr double kDefaultBlurMaskThreshold = 0.05;

// Parameters of a procedurally rendered scene. Motion is an affine warp about
// the image centre, linear in time over the exposure.
struct SceneSpec {
    int width = 64;
    int height = 64;
    int rho = 4;
    Microseconds exposure_us = 60'000;
    int subframes_per_interval = 4;  // renders between consecutive latent frames
    double max_displacement_px = 10.0;
    double max_rotation_deg = 6.0;
    double max_zoom = 0.06;
    int n_shapes = 10;
    // Background texture: sum of sinusoidal gratings with total amplitude
    // grating_amplitude and wavelengths in [min, 3 * min] pixels.
    int n_gratings = 0;
    double grating_amplitude = 0.0;
    double min_wavelength_px = 6.0;
    double blur_mask_threshold = kDefaultBlurMaskThreshold;
    bool zero_velocity = false;

    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct DatasetSample {
    int rho = 1;
    FrameSequence hr_sharp;          // the latent frames, timestamps inside the exposure
    Image hr_blurry;
    EventStream lr_events{1, 1, 0, 0};
    EventStream hr_events{1, 1, 0, 0};
    std::vector<Image> gt_attention;  // one per latent frame
    std::uint64_t seed = 0;
    SimulatorConfig simulator;

    Microseconds t_start() const noexcept { return hr_events.t_start(); }
    Microseconds t_end() const noexcept { return hr_events.t_end(); }

    friend bool operator==(const DatasetSample&, const DatasetSample&) = default;
};

// Throws ValidationError if the invariants linking the fields do not hold.
void validate_sample(const DatasetSample& sample);

// Renders the full high-frame-rate sequence (all subframes, quantized to 16 bit).
FrameSequence render_scene_sequence(const SceneSpec& spec, std::uint64_t seed);

// Deterministic function of (spec, config.seed).
DatasetSample generate_scene(const SceneSpec& spec, const SimulatorConfig& config);

}  // namespace uedsr
