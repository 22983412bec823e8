#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"
#include "uedsr/errors.hpp"
#include "uedsr/sensor_sim.hpp"

using namespace uedsr;

namespace {

constexpr double kEps = 1e-3;

// Single-pixel sequence whose log intensity follows the given levels.
FrameSequence log_sequence(const std::vector<double>& levels, Microseconds dt) {
    std::vector<Image> frames;
    std::vector<Microseconds> stamps;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        frames.emplace_back(1, 1, std::exp(levels[i]) - kEps);
        stamps.push_back(static_cast<Microseconds>(i) * dt);
    }
    return FrameSequence(std::move(frames), std::move(stamps));
}

// Counts threshold crossings by walking the reference level in steps of c.
int step_walk_count(double from, double to, double c) {
    int n = 0;
    double ref = from;
    if (to > from)
        while (ref + c <= to + 1e-9) ref += c, ++n;
    else
        while (ref - c >= to - 1e-9) ref -= c, ++n;
    return n;
}

SimulatorConfig sim(double c = 0.2) {
    SimulatorConfig cfg;
    cfg.contrast_threshold = c;
    cfg.log_eps = kEps;
    return cfg;
}

}  // namespace

TEST(SimulateEvents, ConstantSequenceIsSilent) {
    std::mt19937_64 rng(21);
    const Image f = uedsr::testing::random_image(rng, 8, 6);
    const FrameSequence seq({f, f, f}, {0, 10, 20});
    const EventStream s = simulate_events(seq, sim());
    EXPECT_TRUE(s.empty());
    EXPECT_EQ(s.t_start(), 0);
    EXPECT_EQ(s.t_end(), 20);
}

TEST(SimulateEvents, UnitRampGivesFiveEquallySpacedEvents) {
    std::vector<double> levels;
    for (int i = 0; i <= 10; ++i) levels.push_back(-1.0 + 0.1 * i);
    const EventStream s = simulate_events(log_sequence(levels, 1000), sim(0.2));
    ASSERT_EQ(s.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(s.events()[i].p, 1);
        EXPECT_NEAR(static_cast<double>(s.events()[i].t), 2000.0 * (i + 1), 1.0);
    }
}

TEST(SimulateEvents, SymmetricRampsGiveMatchingPolarityRuns) {
    std::vector<double> up_down;
    for (int i = 0; i <= 8; ++i) up_down.push_back(-2.0 + 0.15 * i);
    for (int i = 7; i >= 0; --i) up_down.push_back(-2.0 + 0.15 * i);
    const EventStream s = simulate_events(log_sequence(up_down, 100), sim(0.2));
    const auto pos = std::count_if(s.events().begin(), s.events().end(), [](const Event& e) { return e.p > 0; });
    const auto neg = static_cast<long>(s.size()) - pos;
    EXPECT_EQ(pos, step_walk_count(-2.0, -2.0 + 1.2, 0.2));
    EXPECT_EQ(pos, neg);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s.events()[i].p, i < static_cast<std::size_t>(pos) ? 1 : -1);
}

TEST(SimulateEvents, ReversedIntensityNegatesPolarity) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
        const EventStream up = simulate_events(log_sequence({-3.0, -3.0 + a / 2, -3.0 + a}, 500), sim());
        const EventStream down = simulate_events(log_sequence({-3.0 + a, -3.0 + a / 2, -3.0}, 500), sim());
        ASSERT_EQ(up.size(), down.size());
        for (std::size_t i = 0; i < up.size(); ++i) {
            EXPECT_EQ(up.events()[i].p, 1);
            EXPECT_EQ(down.events()[i].p, -1);
        }
    }
}

TEST(SimulateEvents, RandomRampsMatchStepWalk) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const double from = std::uniform_real_distribution<double>(-5.0, -1.0)(rng);
        const double amp = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
        const int n = std::uniform_int_distribution<int>(2, 12)(rng);
        std::vector<double> levels;
        for (int i = 0; i < n; ++i) levels.push_back(from + amp * i / (n - 1));
        const EventStream s = simulate_events(log_sequence(levels, 77), sim(0.2));
        ASSERT_EQ(static_cast<int>(s.size()), step_walk_count(from, from + amp, 0.2)) << "amp " << amp;
        for (const Event& e : s.events()) ASSERT_EQ(e.p, amp > 0 ? 1 : -1);
    }
}

TEST(SimulateEvents, OutputIsSortedAcrossPixels) {
    std::mt19937_64 rng(24);
    std::vector<Image> frames;
    for (int i = 0; i < 5; ++i) frames.push_back(uedsr::testing::random_image(rng, 6, 6, 0.05, 1.0));
    const EventStream s = simulate_events(FrameSequence(frames, {0, 100, 200, 300, 400}), sim(0.1));
    EXPECT_FALSE(s.empty());
    EXPECT_TRUE(std::is_sorted(s.events().begin(), s.events().end(),
                               [](const Event& a, const Event& b) { return a.t < b.t; }));
}

TEST(SimulateEvents, RejectsSingleFrameAndBadThreshold) {
    const FrameSequence one({Image(2, 2, 0.5)}, {0});
    EXPECT_THROW(simulate_events(one, sim()), NeedsTwoFramesError);
    const FrameSequence two({Image(2, 2, 0.5), Image(2, 2, 0.6)}, {0, 1});
    EXPECT_THROW(simulate_events(two, sim(0.0)), ValidationError);
}

TEST(SimulateEvents, ThresholdJitterIsSeeded) {
    std::mt19937_64 rng(25);
    std::vector<Image> frames;
    for (int i = 0; i < 4; ++i) frames.push_back(uedsr::testing::random_image(rng, 8, 8, 0.05, 1.0));
    const FrameSequence seq(frames, {0, 10, 20, 30});
    SimulatorConfig cfg = sim(0.15);
    cfg.threshold_sigma = 0.03;
    cfg.seed = 5;
    EXPECT_EQ(simulate_events(seq, cfg), simulate_events(seq, cfg));
    SimulatorConfig other = cfg;
    other.seed = 6;
    EXPECT_NE(simulate_events(seq, cfg), simulate_events(seq, other));
}

TEST(SynthesizeBlur, MeanOfFrames) {
    std::mt19937_64 rng(26);
    const Image f = uedsr::testing::random_image(rng, 5, 4);
    const Image same = synthesize_blur(std::vector<Image>(7, f));
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(same.pixels()[i], f.pixels()[i], 1e-15);
    const Image blur = synthesize_blur(std::vector<Image>{Image(1, 1, 0.0), Image(1, 1, 1.0)});
    EXPECT_EQ(blur.at(0, 0), 0.5);
    EXPECT_THROW(synthesize_blur(std::vector<Image>{}), ValidationError);
}

TEST(SynthesizeBlur, TranslatingBoxMakesLinearRamp) {
    // 1-pixel-per-frame box edge: pixel x is covered in frames k >= x, i.e. 7 - x of them.
    std::vector<Image> frames;
    for (int k = 0; k < 7; ++k) {
        Image f(10, 1);
        for (int x = 0; x < 10; ++x) f.at(x, 0) = x <= k ? 1.0 : 0.0;
        frames.push_back(f);
    }
    const Image b = synthesize_blur(frames);
    for (int x = 0; x < 10; ++x) EXPECT_DOUBLE_EQ(b.at(x, 0), std::max(0, 7 - x) / 7.0);
}

TEST(SynthesizeBlur, PermutationInvariantAndBounded) {
    std::mt19937_64 rng(27);
    std::vector<Image> frames;
    for (int i = 0; i < 7; ++i) frames.push_back(uedsr::testing::random_image(rng, 6, 5));
    const Image b = synthesize_blur(frames);
    std::vector<Image> shuffled = frames;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const Image bs = synthesize_blur(shuffled);
    for (std::size_t i = 0; i < b.size(); ++i) {
        EXPECT_NEAR(b.pixels()[i], bs.pixels()[i], 1e-15);
        double lo = 1, hi = 0;
        for (const Image& f : frames) lo = std::min(lo, f.pixels()[i]), hi = std::max(hi, f.pixels()[i]);
        EXPECT_GE(b.pixels()[i], lo - 1e-15);
        EXPECT_LE(b.pixels()[i], hi + 1e-15);
    }
}

TEST(BlurMask, ThresholdedDifference) {
    std::mt19937_64 rng(28);
    const Image a = uedsr::testing::random_image(rng, 6, 6);
    const Image same = make_blur_mask(a, a, 0.05);
    for (double v : same.pixels()) EXPECT_EQ(v, 0.0);
    const Image offset = make_blur_mask(Image(3, 3, 0.5), Image(3, 3, 0.9), 0.1);
    for (double v : offset.pixels()) EXPECT_NEAR(v, 0.4, 1e-15);
    const Image b = uedsr::testing::random_image(rng, 6, 6);
    const Image m = make_blur_mask(a, b, 0.3);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double d = std::abs(a.pixels()[i] - b.pixels()[i]);
        EXPECT_EQ(m.pixels()[i], d < 0.3 ? 0.0 : d);
    }
    EXPECT_THROW(make_blur_mask(a, Image(5, 6), 0.1), GeometryError);
    EXPECT_THROW(make_blur_mask(a, b, 1.0), RangeError);
}

TEST(BlurMask, MovingEdgeIsNonzeroOnlyInMotionBand) {
    std::vector<Image> frames;
    for (int k = 0; k < 7; ++k) {
        Image f(20, 1, 0.1);
        for (int x = 0; x < 20; ++x)
            if (x >= 6 + k) f.at(x, 0) = 0.9;
        frames.push_back(f);
    }
    const Image b = synthesize_blur(frames);
    for (int k = 0; k < 7; ++k) {
        const Image m = make_blur_mask(b, frames[k], 0.05);
        for (int x = 0; x < 20; ++x) {
            const double d = std::abs(b.at(x, 0) - frames[k].at(x, 0));
            EXPECT_EQ(m.at(x, 0), d < 0.05 ? 0.0 : d);
            if (x < 6 || x > 12) {
                EXPECT_EQ(m.at(x, 0), 0.0);
            }
        }
    }
}

TEST(GenerateScene, ZeroVelocityIsStatic) {
    SceneSpec spec;
    spec.zero_velocity = true;
    SimulatorConfig cfg;
    cfg.seed = 3;
    const DatasetSample s = generate_scene(spec, cfg);
    EXPECT_TRUE(s.hr_events.empty());
    EXPECT_TRUE(s.lr_events.empty());
    for (const Image& f : s.hr_sharp.frames()) EXPECT_EQ(f, s.hr_blurry);
}

TEST(GenerateScene, DeterministicPerSeedAndWellFormed) {
    SceneSpec spec;
    SimulatorConfig cfg;
    cfg.seed = 99;
    const DatasetSample a = generate_scene(spec, cfg);
    EXPECT_EQ(a, generate_scene(spec, cfg));
    cfg.seed = 100;
    EXPECT_NE(a, generate_scene(spec, cfg));
    EXPECT_EQ(a.hr_sharp.size(), 7u);
    EXPECT_EQ(a.lr_events.width(), 16);
    EXPECT_EQ(a.hr_events.width(), 64);
    EXPECT_EQ(a.gt_attention.size(), 7u);
    EXPECT_NO_THROW(validate_sample(a));
    EXPECT_FALSE(a.hr_events.empty());
    for (const Image& f : a.hr_sharp.frames())
        for (double v : f.pixels()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    std::vector<Image> key(a.hr_sharp.frames());
    const Image blur = synthesize_blur(key);
    for (std::size_t i = 0; i < blur.size(); ++i) EXPECT_NEAR(blur.pixels()[i], a.hr_blurry.pixels()[i], 1.0 / 65535);
}

TEST(GenerateScene, TexturedBackgroundChangesRender) {
    SceneSpec plain, textured;
    textured.n_gratings = 3;
    textured.grating_amplitude = 0.3;
    EXPECT_NE(render_scene_sequence(plain, 4), render_scene_sequence(textured, 4));
    textured.min_wavelength_px = 0.0;
    EXPECT_THROW(render_scene_sequence(textured, 4), ValidationError);
}

TEST(GenerateScene, HighResolutionFiresMoreEventsOnAverage) {
    SceneSpec spec;
    long long hr = 0, lr = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        SimulatorConfig cfg;
        cfg.seed = seed;
        const DatasetSample s = generate_scene(spec, cfg);
        hr += static_cast<long long>(s.hr_events.size());
        lr += static_cast<long long>(s.lr_events.size());
    }
    EXPECT_GE(static_cast<double>(hr) / std::max(1LL, lr), 1.0);
}

TEST(GenerateScene, TranslatingRowMatchesPerPixelStepWalk) {
    // Events of every pixel must equal the crossings of its own rendered log trajectory.
    SceneSpec spec;
    spec.max_rotation_deg = 0.0;
    spec.max_zoom = 0.0;
    SimulatorConfig cfg;
    cfg.seed = 17;
    const FrameSequence hr = render_scene_sequence(spec, cfg.seed);
    const DatasetSample s = generate_scene(spec, cfg);
    std::vector<int> counts(64 * 64, 0);
    for (const Event& e : s.hr_events.events()) ++counts[static_cast<std::size_t>(e.y) * 64 + e.x];
    for (int y = 0; y < 64; y += 9) {
        for (int x = 0; x < 64; ++x) {
            int expected = 0;
            double ref = std::log(hr[0].at(x, y) + cfg.log_eps);
            for (std::size_t f = 1; f < hr.size(); ++f) {
                const double l1 = std::log(hr[f].at(x, y) + cfg.log_eps);
                while (ref + cfg.contrast_threshold <= l1 + 1e-9) ref += cfg.contrast_threshold, ++expected;
                while (ref - cfg.contrast_threshold >= l1 - 1e-9) ref -= cfg.contrast_threshold, ++expected;
            }
            ASSERT_EQ(counts[static_cast<std::size_t>(y) * 64 + x], expected) << x << "," << y;
        }
    }
}

TEST(GenerateScene, RejectsBadGeometry) {
    SceneSpec spec;
    spec.width = 62;
    EXPECT_THROW(generate_scene(spec, {}), GeometryError);
    spec.width = 64;
    spec.rho = 3;
    EXPECT_THROW(generate_scene(spec, {}), GeometryError);
}
