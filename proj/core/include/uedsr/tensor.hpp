#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace uedsr {

// Dense row-major tensor. Feature maps use {channels, height, width};
// convolution weights {out, in, k, k}; transposed convolution weights
// {in, out, 2, 2}; biases {out}; scalars {1}.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)), data(count(shape), fill) {}
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {}

    static std::size_t count(const std::vector<int>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1},
                               [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    }

    std::size_t numel() const noexcept { return data.size(); }
    int dim(std::size_t i) const { return shape.at(i); }

    // Feature-map accessors, valid for 3-d tensors.
    int channels() const { return shape.at(0); }
    int height() const { return shape.at(1); }
    int width() const { return shape.at(2); }
    std::size_t plane() const { return static_cast<std::size_t>(shape.at(1)) * shape.at(2); }
    T& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * shape[2] + x]; }
    T at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * shape[2] + x]; }

    template <typename U>
    Tensor<U> cast() const {
        return Tensor<U>(shape, std::vector<U>(data.begin(), data.end()));
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace uedsr
