#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "uedsr/autograd.hpp"
#include "uedsr/errors.hpp"

using namespace uedsr;
using TapeD = Tape<double>;

namespace {

Tensor<double> random_tensor(std::mt19937_64& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : t.data) v = u(rng);
    return t;
}

// builds a scalar from leaves; returns the root var
using Builder = std::function<Var(TapeD&, const std::vector<Var>&)>;

// Central-difference check of d(root)/d(leaf) for every leaf element.
void check_gradients(std::vector<Tensor<double>> leaves, const Builder& build, double h = 1e-6, double tol = 1e-6) {
    TapeD tape;
    std::vector<Var> vars;
    for (const auto& l : leaves) vars.push_back(tape.leaf(l, true));
    const Var root = build(tape, vars);
    tape.backward(root);
    std::vector<Tensor<double>> analytic;
    for (Var v : vars) analytic.push_back(tape.grad(v));

    auto eval = [&](const std::vector<Tensor<double>>& values) {
        TapeD t;
        std::vector<Var> vs;
        for (const auto& l : values) vs.push_back(t.leaf(l, false));
        return t.value(build(t, vs)).data[0];
    };
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        for (std::size_t i = 0; i < leaves[k].data.size(); ++i) {
            auto plus = leaves, minus = leaves;
            plus[k].data[i] += h;
            minus[k].data[i] -= h;
            const double numeric = (eval(plus) - eval(minus)) / (2 * h);
            ASSERT_NEAR(analytic[k].data[i], numeric, tol * std::max(1.0, std::abs(numeric)))
                << "leaf " << k << " element " << i;
        }
    }
}

// Reduces a feature map to a scalar with fixed pseudo-random weights so every element matters.
Var probe(TapeD& tape, Var x) {
    const Tensor<double>& v = tape.value(x);
    Tensor<double> target(v.shape);
    for (std::size_t i = 0; i < target.data.size(); ++i) target.data[i] = 100.0 + 0.37 * static_cast<double>(i % 7);
    return ops::l1_mean(tape, x, target);
}

}  // namespace

TEST(Conv2d, HandComputedSumsWithPaddingAndDilation) {
    TapeD tape;
    Tensor<double> x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Var xv = tape.leaf(x);
    const Var w = tape.leaf(Tensor<double>({1, 1, 3, 3}, 1.0));
    const Var b = tape.leaf(Tensor<double>({1}, 0.5));
    const auto& y = tape.value(ops::conv2d(tape, xv, w, b, 1));
    const double expected[9] = {12, 21, 16, 27, 45, 33, 24, 39, 28};
    for (int i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(y.data[i], expected[i] + 0.5);

    Tensor<double> big({1, 5, 5});
    for (int i = 0; i < 25; ++i) big.data[i] = i;
    const auto& z = tape.value(ops::conv2d(tape, tape.leaf(big), w, b, 2));
    // centre (2,2) with dilation 2 sees rows/cols 0,2,4
    EXPECT_DOUBLE_EQ(z.at(0, 2, 2), 0 + 2 + 4 + 10 + 12 + 14 + 20 + 22 + 24 + 0.5);
    // corner (0,0) sees (0,0),(0,2),(2,0),(2,2)
    EXPECT_DOUBLE_EQ(z.at(0, 0, 0), 0 + 2 + 10 + 12 + 0.5);
}

TEST(ConvTranspose, ScattersKernelPerPixel) {
    TapeD tape;
    const Var x = tape.leaf(Tensor<double>({1, 1, 2}, {2.0, -1.0}));
    const Var w = tape.leaf(Tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4}));
    const Var b = tape.leaf(Tensor<double>({1}, 0.25));
    const auto& y = tape.value(ops::conv_transpose2x(tape, x, w, b));
    ASSERT_EQ(y.shape, (std::vector<int>{1, 2, 4}));
    const double expected[8] = {2, 4, -1, -2, 6, 8, -3, -4};
    for (int i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(y.data[i], expected[i] + 0.25);
}

TEST(Ops, ElementwiseValues) {
    TapeD tape;
    const Var x = tape.leaf(Tensor<double>({1, 1, 3}, {-2.0, 0.0, 3.0}));
    EXPECT_EQ(tape.value(ops::relu(tape, x)).data, (std::vector<double>{0.0, 0.0, 3.0}));
    const auto& s = tape.value(ops::sigmoid(tape, x)).data;
    EXPECT_DOUBLE_EQ(s[1], 0.5);
    EXPECT_NEAR(s[2], 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
    const Var huge = tape.leaf(Tensor<double>({1, 1, 2}, {-1e6, 1e6}));
    const auto& sh = tape.value(ops::sigmoid(tape, huge)).data;
    EXPECT_GT(sh[0], 0.0);
    EXPECT_LT(sh[1], 1.0);
    const Var m = tape.leaf(Tensor<double>({1, 1, 3}, {0.5, 2.0, -1.0}));
    const Var two = tape.leaf(Tensor<double>({2, 1, 3}, {1, 1, 1, 2, 2, 2}));
    EXPECT_EQ(tape.value(ops::mul_map(tape, two, m)).data, (std::vector<double>{0.5, 2, -1, 1, 4, -2}));
    EXPECT_EQ(tape.value(ops::add(tape, x, x)).data, (std::vector<double>{-4.0, 0.0, 6.0}));
    const Var parts[] = {x, two};
    EXPECT_EQ(tape.value(ops::concat<double>(tape, parts)).shape, (std::vector<int>{3, 1, 3}));
    EXPECT_DOUBLE_EQ(tape.value(ops::l1_mean(tape, x, Tensor<double>({1, 1, 3}, 1.0))).data[0], (3 + 1 + 2) / 3.0);
}

TEST(Ops, ShapeMismatchesThrow) {
    TapeD tape;
    const Var a = tape.leaf(Tensor<double>({1, 2, 2}));
    const Var b = tape.leaf(Tensor<double>({1, 3, 2}));
    EXPECT_THROW(ops::add(tape, a, b), GeometryError);
    const Var parts[] = {a, b};
    EXPECT_THROW(ops::concat<double>(tape, parts), GeometryError);
    EXPECT_THROW(ops::l1_mean(tape, a, Tensor<double>({1, 3, 2})), GeometryError);
}

TEST(Gradients, Conv2dBothDilations) {
    std::mt19937_64 rng(41);
    for (int dilation : {1, 2}) {
        check_gradients({random_tensor(rng, {2, 5, 4}), random_tensor(rng, {3, 2, 3, 3}), random_tensor(rng, {3})},
                        [dilation](TapeD& t, const std::vector<Var>& v) {
                            return probe(t, ops::conv2d(t, v[0], v[1], v[2], dilation));
                        });
    }
}

TEST(Gradients, ConvTranspose) {
    std::mt19937_64 rng(42);
    check_gradients({random_tensor(rng, {2, 3, 2}), random_tensor(rng, {2, 3, 2, 2}), random_tensor(rng, {3})},
                    [](TapeD& t, const std::vector<Var>& v) {
                        return probe(t, ops::conv_transpose2x(t, v[0], v[1], v[2]));
                    });
}

TEST(Gradients, SigmoidMulMapConcatAddWeightedSum) {
    std::mt19937_64 rng(43);
    check_gradients({random_tensor(rng, {2, 3, 3}), random_tensor(rng, {1, 3, 3}), random_tensor(rng, {2, 3, 3})},
                    [](TapeD& t, const std::vector<Var>& v) {
                        const Var gated = ops::mul_map(t, v[0], ops::sigmoid(t, v[1]));
                        const Var parts[] = {gated, ops::add(t, v[2], v[0])};
                        const Var a = probe(t, ops::concat<double>(t, parts));
                        const Var b = probe(t, v[2]);
                        const Var terms[] = {a, b};
                        const double weights[] = {0.7, 2.5};
                        return ops::weighted_sum<double>(t, terms, weights);
                    });
}

TEST(Gradients, ReluAwayFromKink) {
    std::mt19937_64 rng(44);
    Tensor<double> x = random_tensor(rng, {2, 3, 3});
    for (double& v : x.data) v += v > 0 ? 0.1 : -0.1;
    check_gradients({x}, [](TapeD& t, const std::vector<Var>& v) { return probe(t, ops::relu(t, v[0])); });
}

TEST(Tape, GradientsAccumulateOverSharedUses) {
    TapeD tape;
    const Var x = tape.leaf(Tensor<double>({1, 1, 1}, 2.0), true);
    const Var y = ops::add(tape, x, x);
    const Var loss = ops::l1_mean(tape, y, Tensor<double>({1, 1, 1}, 0.0));
    tape.backward(loss);
    EXPECT_DOUBLE_EQ(tape.grad(x).data[0], 2.0);
}
