#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "uedsr/errors.hpp"
#include "uedsr/event_core.hpp"

using namespace uedsr;
using uedsr::testing::random_stream;

namespace {

// Per-event accumulation written straight from the kernel definition.
EventTensor voxel_oracle(const EventStream& s, int bins) {
    EventTensor out(bins, s.height(), s.width());
    const double span = static_cast<double>(s.t_end() - s.t_start());
    for (const Event& e : s.events()) {
        const double tn = span > 0 ? (bins - 1) * static_cast<double>(e.t - s.t_start()) / span : 0.0;
        for (int b = 0; b < bins; ++b) out.at(b, e.y, e.x) += e.p * std::max(0.0, 1.0 - std::abs(b - tn));
    }
    return out;
}

void expect_tensor_near(const EventTensor& a, const EventTensor& b, double tol) {
    ASSERT_EQ(a.channels, b.channels);
    ASSERT_EQ(a.height, b.height);
    ASSERT_EQ(a.width, b.width);
    for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_NEAR(a.values[i], b.values[i], tol) << "index " << i;
}

}  // namespace

TEST(EventStream, RejectsUnsortedOutOfRangeAndBadPolarity) {
    EXPECT_THROW(EventStream(4, 4, 0, 10, {{5, 0, 0, 1}, {4, 0, 0, 1}}), ValidationError);
    EXPECT_THROW(EventStream(4, 4, 0, 10, {{5, 4, 0, 1}}), GeometryError);
    EXPECT_THROW(EventStream(4, 4, 0, 10, {{11, 0, 0, 1}}), RangeError);
    EXPECT_THROW(EventStream(4, 4, 0, 10, {{1, 0, 0, 0}}), ValidationError);
    EXPECT_THROW(EventStream(0, 4, 0, 10), GeometryError);
}

TEST(DownsampleEvents, FloorsCoordinates) {
    const EventStream s(8, 8, 0, 100, {{42, 7, 5, -1}});
    const EventStream d = downsample_events(s, 4);
    EXPECT_EQ(d.width(), 2);
    EXPECT_EQ(d.height(), 2);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d.events()[0], (Event{42, 1, 1, -1}));
}

TEST(DownsampleEvents, RhoOneIsIdentity) {
    std::mt19937_64 rng(1);
    const EventStream s = random_stream(rng, 16, 12, 200);
    EXPECT_EQ(downsample_events(s, 1), s);
}

TEST(DownsampleEvents, ComposesAndPreservesCountOrder) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const EventStream s = random_stream(rng, 8, 8, 300);
        const EventStream a = downsample_events(downsample_events(s, 2), 2);
        const EventStream b = downsample_events(s, 4);
        ASSERT_EQ(a, b);
        ASSERT_EQ(b.size(), s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            EXPECT_EQ(b.events()[i].t, s.events()[i].t);
            EXPECT_EQ(b.events()[i].p, s.events()[i].p);
        }
    }
}

TEST(DownsampleEvents, RejectsIndivisibleGeometry) {
    EXPECT_THROW(downsample_events(EventStream(10, 8, 0, 1), 4), GeometryError);
    EXPECT_THROW(downsample_events(EventStream(8, 8, 0, 1), 0), GeometryError);
}

TEST(SliceWindow, WholeIntervalKeepsEverything) {
    std::mt19937_64 rng(3);
    const EventStream s = random_stream(rng, 8, 8, 100, 0, 1000);
    EXPECT_EQ(slice_window(s, 500, 1000).events().size(), s.size());
}

TEST(SliceWindow, ZeroLengthKeepsExactTimestamp) {
    const EventStream s(4, 4, 0, 100, {{10, 0, 0, 1}, {50, 1, 0, 1}, {50, 2, 0, -1}, {90, 3, 0, 1}});
    const EventStream w = slice_window(s, 50, 0);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w.events()[0].t, 50);
    EXPECT_EQ(w.events()[1].t, 50);
}

TEST(SliceWindow, InclusiveBoundsAndClippedInterval) {
    const EventStream s(4, 4, 0, 100, {{10, 0, 0, 1}, {30, 0, 0, 1}, {50, 0, 0, 1}, {70, 0, 0, 1}, {90, 0, 0, 1}});
    const EventStream narrow = slice_window(s, 50, 38);
    ASSERT_EQ(narrow.size(), 1u);
    EXPECT_EQ(narrow.events()[0].t, 50);
    const EventStream inclusive = slice_window(s, 50, 40);
    EXPECT_EQ(inclusive.size(), 3u);
    const EventStream edge = slice_window(s, 5, 40);
    EXPECT_EQ(edge.t_start(), 0);
    EXPECT_EQ(edge.t_end(), 25);
    EXPECT_THROW(slice_window(s, 101, 10), RangeError);
    EXPECT_THROW(slice_window(s, -1, 10), RangeError);
}

TEST(VoxelGrid, EmptyStreamIsZero) {
    const EventTensor g = encode_voxel_grid(EventStream(5, 3, 0, 100), 8);
    EXPECT_EQ(g.channels, 8);
    for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(VoxelGrid, MidpointEventSplitsBetweenMiddleBins) {
    const EventStream s(4, 4, 0, 700, {{350, 2, 1, 1}});
    const EventTensor g = encode_voxel_grid(s, 8);
    EXPECT_DOUBLE_EQ(g.at(3, 1, 2), 0.5);
    EXPECT_DOUBLE_EQ(g.at(4, 1, 2), 0.5);
    double total = 0;
    for (double v : g.values) total += std::abs(v);
    EXPECT_DOUBLE_EQ(total, 1.0);
}

TEST(VoxelGrid, OppositePolaritiesCancel) {
    const EventStream s(4, 4, 0, 100, {{40, 1, 1, 1}, {40, 1, 1, -1}});
    for (double v : encode_voxel_grid(s, 8).values) EXPECT_EQ(v, 0.0);
}

TEST(VoxelGrid, SingleTimestampStreamPutsMassInFirstBin) {
    const EventStream s(4, 4, 20, 20, {{20, 0, 0, 1}, {20, 3, 3, -1}});
    const EventTensor g = encode_voxel_grid(s, 8);
    EXPECT_EQ(g.at(0, 0, 0), 1.0);
    EXPECT_EQ(g.at(0, 3, 3), -1.0);
}

TEST(VoxelGrid, MatchesOracleLinearAndOdd) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        const EventStream a = random_stream(rng, 9, 7, 400, 0, 5000);
        const EventStream b = random_stream(rng, 9, 7, 400, 0, 5000);
        expect_tensor_near(encode_voxel_grid(a, 8), voxel_oracle(a, 8), 1e-12);

        std::vector<Event> merged(a.events().begin(), a.events().end());
        merged.insert(merged.end(), b.events().begin(), b.events().end());
        std::stable_sort(merged.begin(), merged.end(), [](const Event& l, const Event& r) { return l.t < r.t; });
        const EventTensor ga = encode_voxel_grid(a, 8), gb = encode_voxel_grid(b, 8);
        const EventTensor gu = encode_voxel_grid(EventStream(9, 7, 0, 5000, merged), 8);
        for (std::size_t i = 0; i < gu.values.size(); ++i) ASSERT_NEAR(gu.values[i], ga.values[i] + gb.values[i], 1e-12);

        std::vector<Event> negated(a.events().begin(), a.events().end());
        for (Event& e : negated) e.p = static_cast<std::int8_t>(-e.p);
        const EventTensor gn = encode_voxel_grid(EventStream(9, 7, 0, 5000, negated), 8);
        for (std::size_t i = 0; i < gn.values.size(); ++i) ASSERT_EQ(gn.values[i], -ga.values[i]);

        double sum = 0;
        int net = 0;
        for (double v : ga.values) sum += v;
        for (const Event& e : a.events()) net += e.p;
        ASSERT_NEAR(sum, net, 1e-9);
    }
}

TEST(Representation, EmptyStreamGivesSixteenZeroChannels) {
    const EventTensor r = build_representation(EventStream(4, 4, 0, 100), 50, 0.2);
    EXPECT_EQ(r.channels, 16);
    for (double v : r.values) EXPECT_EQ(v, 0.0);
}

TEST(Representation, FullWindowAtMidpointDuplicatesChannels) {
    std::mt19937_64 rng(5);
    const EventStream s = random_stream(rng, 6, 6, 200, 0, 1000);
    const EventTensor r = build_representation(s, 500, 1.0);
    EXPECT_EQ(slice_channels(r, 0, 8), slice_channels(r, 8, 8));
}

TEST(Representation, HandBuiltStreamMatchesAccumulation) {
    const EventStream s(4, 4, 0, 1000, {{100, 0, 0, 1}, {450, 1, 2, -1}, {520, 3, 3, 1}});
    const EventTensor r = build_representation(s, 500, 0.2);
    // window [400, 600] holds the last two events
    const EventStream w(4, 4, 400, 600, {{450, 1, 2, -1}, {520, 3, 3, 1}});
    EventTensor expected = concat_channels(voxel_oracle(w, 8), voxel_oracle(s, 8));
    expect_tensor_near(r, expected, 1e-12);
    EXPECT_NEAR(r.at(1, 2, 1), -0.25, 1e-12);  // t* = 7 * 50 / 200 = 1.75
    EXPECT_NEAR(r.at(2, 2, 1), -0.75, 1e-12);
    EXPECT_THROW(build_representation(s, 500, 0.0), RangeError);
    EXPECT_THROW(build_representation(s, 500, 1.5), RangeError);
}

TEST(EventMaskTest, EmptyOneEventAndDense) {
    const EventMask empty = event_mask(EventStream(3, 2, 0, 10));
    for (double w : empty.weights) EXPECT_EQ(w, 0.1);
    const EventMask one = event_mask(EventStream(5, 5, 0, 10, {{3, 2, 3, -1}}));
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) EXPECT_EQ(one.at(y, x), (x == 2 && y == 3) ? 1.0 : 0.1);
    std::vector<Event> dense;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) dense.push_back({0, x, y, 1});
    for (double w : event_mask(EventStream(3, 3, 0, 1, dense)).weights) EXPECT_EQ(w, 1.0);
}

TEST(EventMaskTest, UnionIsPixelwiseMax) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const EventStream a = random_stream(rng, 8, 8, 20, 0, 100);
        const EventStream b = random_stream(rng, 8, 8, 20, 0, 100);
        std::vector<Event> merged(a.events().begin(), a.events().end());
        merged.insert(merged.end(), b.events().begin(), b.events().end());
        std::stable_sort(merged.begin(), merged.end(), [](const Event& l, const Event& r) { return l.t < r.t; });
        const EventMask mu = event_mask(EventStream(8, 8, 0, 100, merged));
        const EventMask ma = event_mask(a), mb = event_mask(b);
        for (std::size_t i = 0; i < mu.weights.size(); ++i) {
            ASSERT_TRUE(mu.weights[i] == 0.1 || mu.weights[i] == 1.0);
            ASSERT_EQ(mu.weights[i], std::max(ma.weights[i], mb.weights[i]));
        }
    }
}

TEST(RescaleTensor, ConstantStaysConstantAndUnitFactorIsIdentity) {
    const EventTensor c(3, 4, 6, 0.37);
    for (double f : {0.5, 2.0, 4.0}) {
        const EventTensor r = rescale_tensor(c, f);
        for (double v : r.values) EXPECT_NEAR(v, 0.37, 1e-15);
    }
    std::mt19937_64 rng(7);
    EventTensor t(2, 3, 5);
    for (double& v : t.values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    EXPECT_EQ(rescale_tensor(t, 1.0), t);
    EXPECT_THROW(rescale_tensor(t, 0.5), GeometryError);
    EXPECT_THROW(rescale_tensor(t, 0.0), GeometryError);
}

TEST(RescaleTensor, CheckerboardUpscaleMatchesHandWeights) {
    EventTensor t(1, 2, 2);
    t.at(0, 0, 0) = 1.0;
    t.at(0, 1, 1) = 1.0;
    const EventTensor r = rescale_tensor(t, 2.0);
    // source coordinates per output index: 0 -> 0 (clamped), 1 -> 0.25, 2 -> 0.75, 3 -> 1
    const double w[4] = {0.0, 0.25, 0.75, 1.0};
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const double expected = (1 - w[y]) * (1 - w[x]) + w[y] * w[x];
            EXPECT_NEAR(r.at(0, y, x), expected, 1e-15) << x << "," << y;
        }
}

TEST(Channels, ConcatAndSliceRoundTrip) {
    EventTensor a(2, 3, 3, 1.0), b(3, 3, 3, -2.0);
    const EventTensor c = concat_channels(a, b);
    EXPECT_EQ(c.channels, 5);
    EXPECT_EQ(slice_channels(c, 0, 2), a);
    EXPECT_EQ(slice_channels(c, 2, 3), b);
    EXPECT_THROW(concat_channels(a, EventTensor(1, 2, 3)), GeometryError);
    EXPECT_THROW(slice_channels(c, 4, 2), RangeError);
}
