#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "holodsn/nn/autodiff.hpp"
#include "holodsn/nn/tensor.hpp"

namespace holodsn::nn {

namespace detail {

struct Dims3 {
    std::size_t z, y, x;
    [[nodiscard]] std::size_t size() const { return z * y * x; }
};

inline Dims3 spatial(const Shape& s) {
    if (s.size() != 4) throw ShapeError("expected a [c, z, y, x] feature map, got " + shape_str(s));
    return {s[1], s[2], s[3]};
}

/// Index range [lo, hi) of output positions p for which p + off lies in [0, n).
inline void valid_range(std::ptrdiff_t off, std::size_t n, std::size_t& lo, std::size_t& hi) {
    const auto nn = static_cast<std::ptrdiff_t>(n);
    lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -off));
    hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(nn - off, 0, nn));
}

}  // namespace detail

/// Stride-1 3D convolution with zero "same" padding; kernel extents must be odd.
/// x: [ci, Z, Y, X], w: [co, ci, kz, ky, kx], b: [co].
template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const auto d = detail::spatial(x.shape());
    const auto& ws = w.shape();
    if (ws.size() != 5 || ws[1] != x.shape()[0] || b.shape() != Shape{ws[0]}) {
        throw ShapeError("conv3d: kernel " + shape_str(ws) + " incompatible with input " + shape_str(x.shape()));
    }
    const std::size_t co = ws[0], ci = ws[1], kz = ws[2], ky = ws[3], kx = ws[4];
    if (kz % 2 == 0 || ky % 2 == 0 || kx % 2 == 0) throw ShapeError("conv3d: kernel extents must be odd");
    const auto pz = static_cast<std::ptrdiff_t>(kz / 2), py = static_cast<std::ptrdiff_t>(ky / 2),
               px = static_cast<std::ptrdiff_t>(kx / 2);
    const std::size_t vol = d.size(), plane = d.y * d.x;

    // Visits every (output row, input row, weight) triple of the convolution.
    auto for_each_tap = [=](auto&& fn) {
        for (std::size_t o = 0; o < co; ++o) {
            for (std::size_t i = 0; i < ci; ++i) {
                for (std::size_t a = 0; a < kz; ++a) {
                    const auto oz = static_cast<std::ptrdiff_t>(a) - pz;
                    std::size_t z0, z1;
                    detail::valid_range(oz, d.z, z0, z1);
                    for (std::size_t bb = 0; bb < ky; ++bb) {
                        const auto oy = static_cast<std::ptrdiff_t>(bb) - py;
                        std::size_t y0, y1;
                        detail::valid_range(oy, d.y, y0, y1);
                        for (std::size_t c = 0; c < kx; ++c) {
                            const auto ox = static_cast<std::ptrdiff_t>(c) - px;
                            std::size_t x0, x1;
                            detail::valid_range(ox, d.x, x0, x1);
                            const std::size_t widx = (((o * ci + i) * kz + a) * ky + bb) * kx + c;
                            for (std::size_t z = z0; z < z1; ++z) {
                                for (std::size_t y = y0; y < y1; ++y) {
                                    const std::size_t out_row = o * vol + z * plane + y * d.x;
                                    const std::size_t in_row = i * vol + (z + oz) * plane + (y + oy) * d.x + ox;
                                    fn(widx, out_row, in_row, x0, x1);
                                }
                            }
                        }
                    }
                }
            }
        }
    };

    Tensor<T> out(Shape{co, d.z, d.y, d.x});
    {
        const T* xv = x.value().data.data();
        const T* wv = w.value().data.data();
        T* yv = out.data.data();
        for (std::size_t o = 0; o < co; ++o) std::fill(yv + o * vol, yv + (o + 1) * vol, b.value().data[o]);
        for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t x0, std::size_t x1) {
            const T wk = wv[widx];
            T* __restrict yr = yv + orow;
            const T* __restrict xr = xv + irow;
            for (std::size_t p = x0; p < x1; ++p) yr[p] += wk * xr[p];
        });
    }
    return make_result<T>(std::move(out), {x, w, b}, [=](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const T* g = self.grad.data.data();
        if (xn.requires_grad) {
            T* gx = xn.ensure_grad().data.data();
            const T* wv = wn.value.data.data();
            for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t x0, std::size_t x1) {
                const T wk = wv[widx];
                T* __restrict gr = gx + irow;
                const T* __restrict go = g + orow;
                for (std::size_t p = x0; p < x1; ++p) gr[p] += wk * go[p];
            });
        }
        if (wn.requires_grad) {
            T* gw = wn.ensure_grad().data.data();
            const T* xv = xn.value.data.data();
            for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t x0, std::size_t x1) {
                const T* __restrict go = g + orow;
                const T* __restrict xr = xv + irow;
                T acc{0};
                for (std::size_t p = x0; p < x1; ++p) acc += go[p] * xr[p];
                gw[widx] += acc;
            });
        }
        if (bn.requires_grad) {
            T* gb = bn.ensure_grad().data.data();
            for (std::size_t o = 0; o < co; ++o) {
                T acc{0};
                for (std::size_t n = 0; n < vol; ++n) acc += g[o * vol + n];
                gb[o] += acc;
            }
        }
    });
}

/// Output extent of a stride-2 downsampling along one axis (ceiling halving).
inline std::size_t halved(std::size_t n) { return (n + 1) / 2; }

/// 2×2×2 convolution with stride 2; odd extents are zero-padded at the far end.
/// w: [co, ci, 2, 2, 2].
template <typename T>
Var<T> conv3d_down(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const auto d = detail::spatial(x.shape());
    const auto& ws = w.shape();
    if (ws.size() != 5 || ws[1] != x.shape()[0] || ws[2] != 2 || ws[3] != 2 || ws[4] != 2 ||
        b.shape() != Shape{ws[0]}) {
        throw ShapeError("conv3d_down: kernel " + shape_str(ws) + " incompatible with input " + shape_str(x.shape()));
    }
    const std::size_t co = ws[0], ci = ws[1];
    const detail::Dims3 od{halved(d.z), halved(d.y), halved(d.x)};
    const std::size_t ivol = d.size(), ovol = od.size();

    auto for_each_tap = [=](auto&& fn) {
        for (std::size_t o = 0; o < co; ++o) {
            for (std::size_t i = 0; i < ci; ++i) {
                for (std::size_t a = 0; a < 2; ++a) {
                    for (std::size_t bb = 0; bb < 2; ++bb) {
                        for (std::size_t c = 0; c < 2; ++c) {
                            const std::size_t widx = (((o * ci + i) * 2 + a) * 2 + bb) * 2 + c;
                            const std::size_t xend = (d.x + 1 - c) / 2;  // 2p + c < X
                            for (std::size_t z = 0; z < od.z && 2 * z + a < d.z; ++z) {
                                for (std::size_t y = 0; y < od.y && 2 * y + bb < d.y; ++y) {
                                    const std::size_t orow = o * ovol + (z * od.y + y) * od.x;
                                    const std::size_t irow = i * ivol + ((2 * z + a) * d.y + (2 * y + bb)) * d.x + c;
                                    fn(widx, orow, irow, xend);
                                }
                            }
                        }
                    }
                }
            }
        }
    };

    Tensor<T> out(Shape{co, od.z, od.y, od.x});
    {
        const T* xv = x.value().data.data();
        const T* wv = w.value().data.data();
        T* yv = out.data.data();
        for (std::size_t o = 0; o < co; ++o) std::fill(yv + o * ovol, yv + (o + 1) * ovol, b.value().data[o]);
        for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t xend) {
            const T wk = wv[widx];
            T* __restrict yr = yv + orow;
            const T* __restrict xr = xv + irow;
            for (std::size_t p = 0; p < xend; ++p) yr[p] += wk * xr[2 * p];
        });
    }
    return make_result<T>(std::move(out), {x, w, b}, [=](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const T* g = self.grad.data.data();
        if (xn.requires_grad) {
            T* gx = xn.ensure_grad().data.data();
            const T* wv = wn.value.data.data();
            for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t xend) {
                const T wk = wv[widx];
                for (std::size_t p = 0; p < xend; ++p) gx[irow + 2 * p] += wk * g[orow + p];
            });
        }
        if (wn.requires_grad) {
            T* gw = wn.ensure_grad().data.data();
            const T* xv = xn.value.data.data();
            for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t xend) {
                T acc{0};
                for (std::size_t p = 0; p < xend; ++p) acc += g[orow + p] * xv[irow + 2 * p];
                gw[widx] += acc;
            });
        }
        if (bn.requires_grad) {
            T* gb = bn.ensure_grad().data.data();
            for (std::size_t o = 0; o < co; ++o) {
                T acc{0};
                for (std::size_t n = 0; n < ovol; ++n) acc += g[o * ovol + n];
                gb[o] += acc;
            }
        }
    });
}

/// 2×2×2 transposed convolution with stride 2, cropped to `out_dims` (z, y, x).
/// Each output voxel receives exactly one input voxel. w: [co, ci, 2, 2, 2].
template <typename T>
Var<T> conv3d_up(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::array<std::size_t, 3> out_dims) {
    const auto d = detail::spatial(x.shape());
    const auto& ws = w.shape();
    if (ws.size() != 5 || ws[1] != x.shape()[0] || ws[2] != 2 || ws[3] != 2 || ws[4] != 2 ||
        b.shape() != Shape{ws[0]}) {
        throw ShapeError("conv3d_up: kernel " + shape_str(ws) + " incompatible with input " + shape_str(x.shape()));
    }
    const detail::Dims3 od{out_dims[0], out_dims[1], out_dims[2]};
    if (od.z > 2 * d.z || od.y > 2 * d.y || od.x > 2 * d.x || halved(od.z) != d.z || halved(od.y) != d.y ||
        halved(od.x) != d.x) {
        throw ShapeError("conv3d_up: output extent inconsistent with input " + shape_str(x.shape()));
    }
    const std::size_t co = ws[0], ci = ws[1];
    const std::size_t ivol = d.size(), ovol = od.size();

    auto for_each_tap = [=](auto&& fn) {
        for (std::size_t o = 0; o < co; ++o) {
            for (std::size_t i = 0; i < ci; ++i) {
                for (std::size_t a = 0; a < 2; ++a) {
                    for (std::size_t bb = 0; bb < 2; ++bb) {
                        for (std::size_t c = 0; c < 2; ++c) {
                            const std::size_t widx = (((o * ci + i) * 2 + a) * 2 + bb) * 2 + c;
                            const std::size_t xend = (od.x + 1 - c) / 2;  // 2p + c < OX
                            for (std::size_t z = 0; 2 * z + a < od.z; ++z) {
                                for (std::size_t y = 0; 2 * y + bb < od.y; ++y) {
                                    const std::size_t orow = o * ovol + ((2 * z + a) * od.y + (2 * y + bb)) * od.x + c;
                                    const std::size_t irow = i * ivol + (z * d.y + y) * d.x;
                                    fn(widx, orow, irow, xend);
                                }
                            }
                        }
                    }
                }
            }
        }
    };

    Tensor<T> out(Shape{co, od.z, od.y, od.x});
    {
        const T* xv = x.value().data.data();
        const T* wv = w.value().data.data();
        T* yv = out.data.data();
        for (std::size_t o = 0; o < co; ++o) std::fill(yv + o * ovol, yv + (o + 1) * ovol, b.value().data[o]);
        for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t xend) {
            const T wk = wv[widx];
            for (std::size_t p = 0; p < xend; ++p) yv[orow + 2 * p] += wk * xv[irow + p];
        });
    }
    return make_result<T>(std::move(out), {x, w, b}, [=](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const T* g = self.grad.data.data();
        if (xn.requires_grad) {
            T* gx = xn.ensure_grad().data.data();
            const T* wv = wn.value.data.data();
            for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t xend) {
                const T wk = wv[widx];
                for (std::size_t p = 0; p < xend; ++p) gx[irow + p] += wk * g[orow + 2 * p];
            });
        }
        if (wn.requires_grad) {
            T* gw = wn.ensure_grad().data.data();
            const T* xv = xn.value.data.data();
            for_each_tap([&](std::size_t widx, std::size_t orow, std::size_t irow, std::size_t xend) {
                T acc{0};
                for (std::size_t p = 0; p < xend; ++p) acc += g[orow + 2 * p] * xv[irow + p];
                gw[widx] += acc;
            });
        }
        if (bn.requires_grad) {
            T* gb = bn.ensure_grad().data.data();
            for (std::size_t o = 0; o < co; ++o) {
                T acc{0};
                for (std::size_t n = 0; n < ovol; ++n) acc += g[o * ovol + n];
                gb[o] += acc;
            }
        }
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> out = x.value();
    for (auto& v : out.data) v = v < T{0} ? T{0} : v;  // NaN passes through
    return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& gx = xn.ensure_grad().data;
        for (std::size_t n = 0; n < gx.size(); ++n) {
            if (xn.value.data[n] > T{0}) gx[n] += self.grad.data[n];
        }
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    Tensor<T> out = x.value();
    for (auto& v : out.data) v = T{1} / (T{1} + std::exp(-v));
    return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
        auto& gx = self.parents[0]->ensure_grad().data;
        for (std::size_t n = 0; n < gx.size(); ++n) {
            const T s = self.value.data[n];
            gx[n] += self.grad.data[n] * s * (T{1} - s);
        }
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor<T> out = a.value();
    for (std::size_t n = 0; n < out.size(); ++n) out.data[n] += b.value().data[n];
    return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad().data;
            for (std::size_t n = 0; n < g.size(); ++n) g[n] += self.grad.data[n];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
    Tensor<T> out = a.value();
    for (auto& v : out.data) v *= s;
    return make_result<T>(std::move(out), {a}, [s](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad().data;
        for (std::size_t n = 0; n < g.size(); ++n) g[n] += s * self.grad.data[n];
    });
}

/// Σᵢ αᵢ xᵢ over shape-identical tensors; α has shape [n]. Differentiable in both
/// the tensors and the weights.
template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& xs, const Var<T>& alpha) {
    if (xs.empty() || alpha.shape() != Shape{xs.size()}) throw ShapeError("weighted_sum: weight count mismatch");
    for (const auto& x : xs) require_same_shape(x.value(), xs.front().value(), "weighted_sum");
    const auto& al = alpha.value().data;
    Tensor<T> out(xs.front().shape(), T{0});
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto& xv = xs[i].value().data;
        for (std::size_t n = 0; n < out.size(); ++n) out.data[n] += al[i] * xv[n];
    }
    std::vector<Var<T>> inputs = xs;
    inputs.push_back(alpha);
    const std::size_t k = xs.size();
    return make_result<T>(std::move(out), std::move(inputs), [k](Node<T>& self) {
        auto& an = *self.parents[k];
        const auto& g = self.grad.data;
        for (std::size_t i = 0; i < k; ++i) {
            auto& xn = *self.parents[i];
            if (xn.requires_grad) {
                auto& gx = xn.ensure_grad().data;
                const T ai = an.value.data[i];
                for (std::size_t n = 0; n < g.size(); ++n) gx[n] += ai * g[n];
            }
            if (an.requires_grad) {
                T acc{0};
                for (std::size_t n = 0; n < g.size(); ++n) acc += xn.value.data[n] * g[n];
                an.ensure_grad().data[i] += acc;
            }
        }
    });
}

/// 2×2 max pooling over the last two axes of [c, z, y, x] (floor of odd extents).
template <typename T>
Var<T> maxpool2d(const Var<T>& x) {
    const auto d = detail::spatial(x.shape());
    const std::size_t c = x.shape()[0], oy = d.y / 2, ox = d.x / 2;
    if (oy == 0 || ox == 0) throw ShapeError("maxpool2d: input too small");
    Tensor<T> out(Shape{c, d.z, oy, ox});
    std::vector<std::size_t> arg(out.size());
    const auto& xv = x.value().data;
    std::size_t n = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t z = 0; z < d.z; ++z) {
            const std::size_t base = (ch * d.z + z) * d.y * d.x;
            for (std::size_t y = 0; y < oy; ++y) {
                for (std::size_t xx = 0; xx < ox; ++xx, ++n) {
                    std::size_t best = base + (2 * y) * d.x + 2 * xx;
                    for (std::size_t a = 0; a < 2; ++a) {
                        for (std::size_t b = 0; b < 2; ++b) {
                            const std::size_t idx = base + (2 * y + a) * d.x + 2 * xx + b;
                            if (xv[idx] > xv[best]) best = idx;
                        }
                    }
                    arg[n] = best;
                    out.data[n] = xv[best];
                }
            }
        }
    }
    return make_result<T>(std::move(out), {x}, [arg = std::move(arg)](Node<T>& self) {
        auto& gx = self.parents[0]->ensure_grad().data;
        for (std::size_t m = 0; m < arg.size(); ++m) gx[arg[m]] += self.grad.data[m];
    });
}

/// Fully connected layer on the flattened input. w: [out, in], b: [out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const auto& ws = w.shape();
    if (ws.size() != 2 || ws[1] != x.value().size() || b.shape() != Shape{ws[0]}) {
        throw ShapeError("linear: weight " + shape_str(ws) + " incompatible with input of size " +
                         std::to_string(x.value().size()));
    }
    const std::size_t no = ws[0], ni = ws[1];
    Tensor<T> out(Shape{no});
    for (std::size_t o = 0; o < no; ++o) {
        T acc = b.value().data[o];
        for (std::size_t i = 0; i < ni; ++i) acc += w.value().data[o * ni + i] * x.value().data[i];
        out.data[o] = acc;
    }
    return make_result<T>(std::move(out), {x, w, b}, [no, ni](Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const auto& g = self.grad.data;
        if (xn.requires_grad) {
            auto& gx = xn.ensure_grad().data;
            for (std::size_t o = 0; o < no; ++o) {
                for (std::size_t i = 0; i < ni; ++i) gx[i] += wn.value.data[o * ni + i] * g[o];
            }
        }
        if (wn.requires_grad) {
            auto& gw = wn.ensure_grad().data;
            for (std::size_t o = 0; o < no; ++o) {
                for (std::size_t i = 0; i < ni; ++i) gw[o * ni + i] += g[o] * xn.value.data[i];
            }
        }
        if (bn.requires_grad) {
            auto& gb = bn.ensure_grad().data;
            for (std::size_t o = 0; o < no; ++o) gb[o] += g[o];
        }
    });
}

template <typename T>
Var<T> softmax(const Var<T>& x) {
    if (x.shape().size() != 1) throw ShapeError("softmax expects a vector");
    Tensor<T> out = x.value();
    const T mx = *std::max_element(out.data.begin(), out.data.end());
    T sum{0};
    for (auto& v : out.data) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : out.data) v /= sum;
    return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
        const auto& s = self.value.data;
        const auto& g = self.grad.data;
        T dot{0};
        for (std::size_t n = 0; n < s.size(); ++n) dot += s[n] * g[n];
        auto& gx = self.parents[0]->ensure_grad().data;
        for (std::size_t n = 0; n < s.size(); ++n) gx[n] += s[n] * (g[n] - dot);
    });
}

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross entropy; predictions are clamped to [ε, 1−ε].
template <typename T>
Var<T> bce_loss(const Var<T>& pred, const Tensor<T>& label, double eps = kBceEpsilon) {
    if (pred.value().size() != label.size()) {
        throw ShapeError("bce_loss: prediction " + shape_str(pred.shape()) + " vs label " + shape_str(label.shape));
    }
    const auto& p = pred.value().data;
    const std::size_t n = p.size();
    if (n == 0) throw ShapeError("bce_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double q = std::clamp(static_cast<double>(p[i]), eps, 1.0 - eps);
        const double y = static_cast<double>(label.data[i]);
        acc -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
    }
    Tensor<T> out(Shape{1}, static_cast<T>(acc / static_cast<double>(n)));
    return make_result<T>(std::move(out), {pred}, [label, eps, n](Node<T>& self) {
        auto& pn = *self.parents[0];
        auto& gp = pn.ensure_grad().data;
        const double g = static_cast<double>(self.grad.data[0]) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double q = static_cast<double>(pn.value.data[i]);
            if (q < eps || q > 1.0 - eps) continue;
            const double y = static_cast<double>(label.data[i]);
            gp[i] += static_cast<T>(g * (-(y / q) + (1.0 - y) / (1.0 - q)));
        }
    });
}

/// Same value as bce_loss(sigmoid(z), label), differentiated with respect to the
/// logits: dL/dz = (σ(z) − y) / n. Unlike the composed form this keeps a gradient on
/// voxels whose prediction sits in the clamp or where the sigmoid underflows.
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& label, double eps = kBceEpsilon) {
    if (logits.value().size() != label.size()) {
        throw ShapeError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs label " +
                         shape_str(label.shape));
    }
    const auto& z = logits.value().data;
    const std::size_t n = z.size();
    if (n == 0) throw ShapeError("bce_with_logits: empty input");
    std::vector<double> s(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(z[i])));
        const double q = std::clamp(s[i], eps, 1.0 - eps);
        const double y = static_cast<double>(label.data[i]);
        acc -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
    }
    Tensor<T> out(Shape{1}, static_cast<T>(acc / static_cast<double>(n)));
    return make_result<T>(std::move(out), {logits}, [label, s = std::move(s), n](Node<T>& self) {
        auto& gz = self.parents[0]->ensure_grad().data;
        const double g = static_cast<double>(self.grad.data[0]) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) gz[i] += static_cast<T>(g * (s[i] - static_cast<double>(label.data[i])));
    });
}

/// Σ‖w‖² over a set of tensors.
template <typename T>
Var<T> sum_squares(const std::vector<Var<T>>& ws) {
    double acc = 0.0;
    for (const auto& w : ws) {
        for (T v : w.value().data) acc += static_cast<double>(v) * static_cast<double>(v);
    }
    Tensor<T> out(Shape{1}, static_cast<T>(acc));
    return make_result<T>(std::move(out), ws, [](Node<T>& self) {
        const T g = self.grad.data[0];
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& gw = p->ensure_grad().data;
            for (std::size_t n = 0; n < gw.size(); ++n) gw[n] += T{2} * g * p->value.data[n];
        }
    });
}

/// Keeps every `stride`-th sample along the last two axes (no gradient; data path only).
template <typename T>
Tensor<T> subsample2d(const Tensor<T>& x, std::size_t stride) {
    const auto d = detail::spatial(x.shape);
    if (stride == 0 || d.y % stride != 0 || d.x % stride != 0) throw ShapeError("subsample2d: extent not divisible");
    const std::size_t oy = d.y / stride, ox = d.x / stride, c = x.shape[0];
    Tensor<T> out(Shape{c, d.z, oy, ox});
    std::size_t n = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t z = 0; z < d.z; ++z) {
            for (std::size_t y = 0; y < oy; ++y) {
                for (std::size_t xx = 0; xx < ox; ++xx) {
                    out.data[n++] = x.data[((ch * d.z + z) * d.y + y * stride) * d.x + xx * stride];
                }
            }
        }
    }
    return out;
}

}  // namespace holodsn::nn
