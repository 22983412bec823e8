#include "uedsr/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "uedsr/errors.hpp"

namespace uedsr {

std::string shape_string(const std::vector<int>& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

template <typename T>
Var Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, {}});
    return static_cast<Var>(nodes_.size() - 1);
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, std::span<const Var> inputs, Backward backward) {
    const bool needs = std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return nodes_[v].requires_grad; });
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
    return static_cast<Var>(nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var v) {
    Node& n = nodes_[v];
    if (n.grad.data.size() != n.value.data.size()) n.grad = Tensor<T>(n.value.shape);
    return n.grad;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) {
    return grad_buffer(v);
}

template <typename T>
void Tape<T>::backward(Var root) {
    if (nodes_[root].value.numel() != 1) throw ValidationError("backward needs a scalar root");
    for (Node& n : nodes_) n.grad = Tensor<T>();
    grad_buffer(root).data[0] = T(1);
    for (Var i = root; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.backward && !n.grad.data.empty()) n.backward(*this, i);
    }
}

namespace ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
void require_3d(const Tensor<T>& t, const char* op) {
    if (t.shape.size() != 3) throw GeometryError(std::string(op) + ": expected a 3-d feature map, got " + shape_string(t.shape));
}

// cols[(c*k + ky)*k + kx][y*W + x] = x[c][y + (ky - k/2)*d][x + (kx - k/2)*d], zero outside.
template <typename T>
void im2col(const T* src, int channels, int h, int w, int k, int d, T* cols) {
    const int r = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + (static_cast<std::size_t>(c * k + ky) * k + kx) * hw;
                const int oy = (ky - r) * d;
                const int ox = (kx - r) * d;
                const int x_lo = std::clamp(-ox, 0, w);
                const int x_hi = std::clamp(w - ox, 0, w);
                for (int y = 0; y < h; ++y) {
                    T* dst = row + static_cast<std::size_t>(y) * w;
                    const int sy = y + oy;
                    if (sy < 0 || sy >= h || x_lo >= x_hi) {
                        std::fill(dst, dst + w, T(0));
                        continue;
                    }
                    const T* line = src + c * hw + static_cast<std::size_t>(sy) * w;
                    std::fill(dst, dst + x_lo, T(0));
                    for (int x = x_lo; x < x_hi; ++x) dst[x] = line[x + ox];
                    std::fill(dst + x_hi, dst + w, T(0));
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, int channels, int h, int w, int k, int d, T* dst) {
    const int r = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + (static_cast<std::size_t>(c * k + ky) * k + kx) * hw;
                const int oy = (ky - r) * d;
                const int ox = (kx - r) * d;
                const int x_lo = std::clamp(-ox, 0, w);
                const int x_hi = std::clamp(w - ox, 0, w);
                for (int y = 0; y < h; ++y) {
                    const int sy = y + oy;
                    if (sy < 0 || sy >= h) continue;
                    const T* g = row + static_cast<std::size_t>(y) * w;
                    T* line = dst + c * hw + static_cast<std::size_t>(sy) * w;
                    for (int x = x_lo; x < x_hi; ++x) line[x + ox] += g[x];
                }
            }
        }
    }
}

}  // namespace

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, Var bias, int dilation) {
    const Tensor<T>& in = tape.value(x);
    const Tensor<T>& wt = tape.value(weight);
    require_3d(in, "conv2d");
    if (wt.shape.size() != 4 || wt.shape[1] != in.shape[0] || wt.shape[2] != wt.shape[3] || wt.shape[2] % 2 == 0)
        throw GeometryError("conv2d: weight " + shape_string(wt.shape) + " incompatible with input " +
                            shape_string(in.shape));
    const int cin = in.shape[0], h = in.shape[1], w = in.shape[2];
    const int cout = wt.shape[0], k = wt.shape[2];
    if (tape.value(bias).numel() != static_cast<std::size_t>(cout)) throw GeometryError("conv2d: bias size");
    const int kk = cin * k * k;
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;

    std::vector<T> cols(static_cast<std::size_t>(kk) * hw);
    im2col(in.data.data(), cin, h, w, k, dilation, cols.data());

    Tensor<T> out({cout, h, w});
    Eigen::Map<const RowMat<T>> wm(wt.data.data(), cout, kk);
    Eigen::Map<const RowMat<T>> cm(cols.data(), kk, hw);
    Eigen::Map<RowMat<T>> om(out.data.data(), cout, hw);
    om.noalias() = wm * cm;
    om.colwise() += Eigen::Map<const ColVec<T>>(tape.value(bias).data.data(), cout);

    const Var inputs[] = {x, weight, bias};
    return tape.record(std::move(out), inputs, [=](Tape<T>& tp, Var self) {
        const Tensor<T>& xin = tp.value(x);
        Eigen::Map<const RowMat<T>> g(tp.grad_buffer(self).data.data(), cout, hw);
        std::vector<T> c(static_cast<std::size_t>(kk) * hw);
        im2col(xin.data.data(), cin, h, w, k, dilation, c.data());
        Eigen::Map<const RowMat<T>> cmat(c.data(), kk, hw);
        if (tp.requires_grad(weight)) {
            Eigen::Map<RowMat<T>> gw(tp.grad_buffer(weight).data.data(), cout, kk);
            gw.noalias() += g * cmat.transpose();
        }
        if (tp.requires_grad(bias)) {
            Eigen::Map<ColVec<T>> gb(tp.grad_buffer(bias).data.data(), cout);
            gb += g.rowwise().sum();
        }
        if (tp.requires_grad(x)) {
            Eigen::Map<const RowMat<T>> wmat(tp.value(weight).data.data(), cout, kk);
            RowMat<T> gc = wmat.transpose() * g;
            col2im_add(gc.data(), cin, h, w, k, dilation, tp.grad_buffer(x).data.data());
        }
    });
}

template <typename T>
Var conv_transpose2x(Tape<T>& tape, Var x, Var weight, Var bias) {
    const Tensor<T>& in = tape.value(x);
    const Tensor<T>& wt = tape.value(weight);
    require_3d(in, "conv_transpose2x");
    if (wt.shape.size() != 4 || wt.shape[0] != in.shape[0] || wt.shape[2] != 2 || wt.shape[3] != 2)
        throw GeometryError("conv_transpose2x: weight " + shape_string(wt.shape) + " incompatible with input " +
                            shape_string(in.shape));
    const int cin = in.shape[0], h = in.shape[1], w = in.shape[2];
    const int cout = wt.shape[1];
    if (tape.value(bias).numel() != static_cast<std::size_t>(cout)) throw GeometryError("conv_transpose2x: bias size");
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;

    // Row (dy*2 + dx)*cout + co, column ci  <->  weight[ci][co][dy][dx].
    auto stacked = [=](const Tensor<T>& wtensor) {
        RowMat<T> m(4 * cout, cin);
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co)
                for (int q = 0; q < 4; ++q) m(q * cout + co, ci) = wtensor.data[(static_cast<std::size_t>(ci) * cout + co) * 4 + q];
        return m;
    };

    Eigen::Map<const RowMat<T>> xm(in.data.data(), cin, hw);
    const RowMat<T> y = stacked(wt) * xm;
    Tensor<T> out({cout, 2 * h, 2 * w});
    const T* b = tape.value(bias).data.data();
    for (int q = 0; q < 4; ++q) {
        const int dy = q / 2, dx = q % 2;
        for (int co = 0; co < cout; ++co) {
            const T* row = y.data() + (static_cast<std::size_t>(q) * cout + co) * hw;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) out.at(co, 2 * yy + dy, 2 * xx + dx) = row[yy * w + xx] + b[co];
        }
    }

    const Var inputs[] = {x, weight, bias};
    return tape.record(std::move(out), inputs, [=](Tape<T>& tp, Var self) {
        const Tensor<T>& gout = tp.grad_buffer(self);
        RowMat<T> g(4 * cout, hw);
        for (int q = 0; q < 4; ++q) {
            const int dy = q / 2, dx = q % 2;
            for (int co = 0; co < cout; ++co) {
                T* row = g.data() + (static_cast<std::size_t>(q) * cout + co) * hw;
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) row[yy * w + xx] = gout.at(co, 2 * yy + dy, 2 * xx + dx);
            }
        }
        if (tp.requires_grad(bias)) {
            T* gb = tp.grad_buffer(bias).data.data();
            for (int q = 0; q < 4; ++q)
                for (int co = 0; co < cout; ++co) gb[co] += g.row(q * cout + co).sum();
        }
        Eigen::Map<const RowMat<T>> xmat(tp.value(x).data.data(), cin, hw);
        if (tp.requires_grad(weight)) {
            const RowMat<T> gw = g * xmat.transpose();  // (4*cout) x cin
            T* dst = tp.grad_buffer(weight).data.data();
            for (int ci = 0; ci < cin; ++ci)
                for (int co = 0; co < cout; ++co)
                    for (int q = 0; q < 4; ++q) dst[(static_cast<std::size_t>(ci) * cout + co) * 4 + q] += gw(q * cout + co, ci);
        }
        if (tp.requires_grad(x)) {
            Eigen::Map<RowMat<T>> gx(tp.grad_buffer(x).data.data(), cin, hw);
            gx.noalias() += stacked(tp.value(weight)).transpose() * g;
        }
    });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
    Tensor<T> out = tape.value(x);
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    const Var inputs[] = {x};
    return tape.record(std::move(out), inputs, [=](Tape<T>& tp, Var self) {
        const auto& xin = tp.value(x).data;
        const auto& g = tp.grad_buffer(self).data;
        auto& gx = tp.grad_buffer(x).data;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (xin[i] > T(0)) gx[i] += g[i];
    });
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
    Tensor<T> out = tape.value(x);
    const T lo = std::numeric_limits<T>::min();
    const T hi = std::nextafter(T(1), T(0));
    for (T& v : out.data) {
        const T s = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
        v = std::clamp(s, lo, hi);
    }
    const Var inputs[] = {x};
    return tape.record(std::move(out), inputs, [=](Tape<T>& tp, Var self) {
        const auto& s = tp.value(self).data;
        const auto& g = tp.grad_buffer(self).data;
        auto& gx = tp.grad_buffer(x).data;
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s[i] * (T(1) - s[i]);
    });
}

template <typename T>
Var concat(Tape<T>& tape, std::span<const Var> parts) {
    if (parts.empty()) throw GeometryError("concat: no inputs");
    const Tensor<T>& first = tape.value(parts[0]);
    require_3d(first, "concat");
    int channels = 0;
    for (Var p : parts) {
        const Tensor<T>& t = tape.value(p);
        require_3d(t, "concat");
        if (t.shape[1] != first.shape[1] || t.shape[2] != first.shape[2])
            throw GeometryError("concat: spatial mismatch " + shape_string(t.shape) + " vs " + shape_string(first.shape));
        channels += t.shape[0];
    }
    Tensor<T> out({channels, first.shape[1], first.shape[2]});
    std::size_t offset = 0;
    for (Var p : parts) {
        const auto& d = tape.value(p).data;
        std::copy(d.begin(), d.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += d.size();
    }
    std::vector<Var> ids(parts.begin(), parts.end());
    return tape.record(std::move(out), parts, [ids](Tape<T>& tp, Var self) {
        std::size_t off = 0;
        for (Var p : ids) {
            const std::size_t n = tp.value(p).numel();
            if (tp.requires_grad(p)) {
                const auto& g = tp.grad_buffer(self).data;
                auto& gp = tp.grad_buffer(p).data;
                for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
            }
            off += n;
        }
    });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
    if (tape.value(a).shape != tape.value(b).shape)
        throw GeometryError("add: shape mismatch " + shape_string(tape.value(a).shape) + " vs " +
                            shape_string(tape.value(b).shape));
    Tensor<T> out = tape.value(a);
    const auto& bd = tape.value(b).data;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bd[i];
    const Var inputs[] = {a, b};
    return tape.record(std::move(out), inputs, [=](Tape<T>& tp, Var self) {
        for (Var v : {a, b}) {
            if (!tp.requires_grad(v)) continue;
            const auto& g = tp.grad_buffer(self).data;
            auto& gv = tp.grad_buffer(v).data;
            for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
        }
    });
}

template <typename T>
Var mul_map(Tape<T>& tape, Var x, Var map) {
    const Tensor<T>& in = tape.value(x);
    const Tensor<T>& m = tape.value(map);
    require_3d(in, "mul_map");
    require_3d(m, "mul_map");
    if (m.shape[0] != 1 || m.shape[1] != in.shape[1] || m.shape[2] != in.shape[2])
        throw GeometryError("mul_map: map " + shape_string(m.shape) + " incompatible with " + shape_string(in.shape));
    Tensor<T> out = in;
    const std::size_t plane = in.plane();
    for (int c = 0; c < in.shape[0]; ++c)
        for (std::size_t i = 0; i < plane; ++i) out.data[c * plane + i] *= m.data[i];
    const Var inputs[] = {x, map};
    return tape.record(std::move(out), inputs, [=](Tape<T>& tp, Var self) {
        const auto& g = tp.grad_buffer(self).data;
        const auto& xin = tp.value(x).data;
        const auto& md = tp.value(map).data;
        const int channels = tp.value(x).shape[0];
        if (tp.requires_grad(x)) {
            auto& gx = tp.grad_buffer(x).data;
            for (int c = 0; c < channels; ++c)
                for (std::size_t i = 0; i < plane; ++i) gx[c * plane + i] += g[c * plane + i] * md[i];
        }
        if (tp.requires_grad(map)) {
            auto& gm = tp.grad_buffer(map).data;
            for (int c = 0; c < channels; ++c)
                for (std::size_t i = 0; i < plane; ++i) gm[i] += g[c * plane + i] * xin[c * plane + i];
        }
    });
}

template <typename T>
Var l1_mean(Tape<T>& tape, Var x, const Tensor<T>& target) {
    const Tensor<T>& in = tape.value(x);
    if (in.shape != target.shape)
        throw GeometryError("l1: shape mismatch " + shape_string(in.shape) + " vs " + shape_string(target.shape));
    double sum = 0.0;
    for (std::size_t i = 0; i < in.data.size(); ++i) sum += std::abs(static_cast<double>(in.data[i]) - target.data[i]);
    const double n = static_cast<double>(in.data.size());
    Tensor<T> out({1}, static_cast<T>(sum / n));
    const Var inputs[] = {x};
    return tape.record(std::move(out), inputs, [=, tgt = target.data](Tape<T>& tp, Var self) {
        const T g = tp.grad_buffer(self).data[0] / static_cast<T>(n);
        const auto& xin = tp.value(x).data;
        auto& gx = tp.grad_buffer(x).data;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const T d = xin[i] - tgt[i];
            gx[i] += d > T(0) ? g : (d < T(0) ? -g : T(0));
        }
    });
}

template <typename T>
Var weighted_sum(Tape<T>& tape, std::span<const Var> terms, std::span<const T> weights) {
    if (terms.size() != weights.size()) throw ValidationError("weighted_sum: size mismatch");
    T total = T(0);
    for (std::size_t i = 0; i < terms.size(); ++i) total += weights[i] * tape.value(terms[i]).data.at(0);
    std::vector<Var> ids(terms.begin(), terms.end());
    std::vector<T> ws(weights.begin(), weights.end());
    return tape.record(Tensor<T>({1}, total), terms, [ids, ws](Tape<T>& tp, Var self) {
        const T g = tp.grad_buffer(self).data[0];
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (tp.requires_grad(ids[i])) tp.grad_buffer(ids[i]).data[0] += ws[i] * g;
    });
}

#define UEDSR_INSTANTIATE_OPS(T)                                                   \
    template Var conv2d<T>(Tape<T>&, Var, Var, Var, int);                          \
    template Var conv_transpose2x<T>(Tape<T>&, Var, Var, Var);                     \
    template Var relu<T>(Tape<T>&, Var);                                           \
    template Var sigmoid<T>(Tape<T>&, Var);                                        \
    template Var concat<T>(Tape<T>&, std::span<const Var>);                        \
    template Var add<T>(Tape<T>&, Var, Var);                                       \
    template Var mul_map<T>(Tape<T>&, Var, Var);                                   \
    template Var l1_mean<T>(Tape<T>&, Var, const Tensor<T>&);                      \
    template Var weighted_sum<T>(Tape<T>&, std::span<const Var>, std::span<const T>);

UEDSR_INSTANTIATE_OPS(float)
UEDSR_INSTANTIATE_OPS(double)
#undef UEDSR_INSTANTIATE_OPS

}  // namespace ops

template class Tape<float>;
template class Tape<double>;

}  // namespace uedsr
