#include <gtest/gtest.h>

#include <cmath>

#include "holodsn/core/rng.hpp"
#include "holodsn/nn/ops.hpp"
#include "oracles/gradcheck.hpp"

using namespace holodsn;
using namespace holodsn::nn;

namespace {

Var<double> random_var(const Shape& s, Rng& rng, bool trainable = true, double scale = 1.0) {
    Tensor<double> t(s);
    for (auto& v : t.data) v = scale * rng.normal();
    return Var<double>::leaf(std::move(t), trainable);
}

/// Random linear readout so every output entry carries a distinct gradient.
Var<double> readout(const Var<double>& y, std::uint64_t seed) {
    Rng rng(seed);
    auto w = random_var({1, y.value().size()}, rng, false);
    auto b = Var<double>::leaf(Tensor<double>(Shape{1}), false);
    return linear(y, w, b);
}

using Named = std::vector<std::pair<std::string, Var<double>>>;

/// Direct (unoptimized) same-padding convolution used as a forward oracle.
Tensor<double> conv3d_reference(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
    const std::size_t ci = x.shape[0], Z = x.shape[1], Y = x.shape[2], X = x.shape[3];
    const std::size_t co = w.shape[0], kz = w.shape[2], ky = w.shape[3], kx = w.shape[4];
    Tensor<double> out(Shape{co, Z, Y, X});
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t z = 0; z < Z; ++z)
            for (std::size_t y = 0; y < Y; ++y)
                for (std::size_t xx = 0; xx < X; ++xx) {
                    double acc = b.data[o];
                    for (std::size_t i = 0; i < ci; ++i)
                        for (std::size_t a = 0; a < kz; ++a)
                            for (std::size_t c = 0; c < ky; ++c)
                                for (std::size_t d = 0; d < kx; ++d) {
                                    const long zz = long(z + a) - long(kz / 2), yy = long(y + c) - long(ky / 2),
                                               xi = long(xx + d) - long(kx / 2);
                                    if (zz < 0 || yy < 0 || xi < 0 || zz >= long(Z) || yy >= long(Y) || xi >= long(X))
                                        continue;
                                    acc += w.data[(((o * ci + i) * kz + a) * ky + c) * kx + d] *
                                           x.data[((i * Z + zz) * Y + yy) * X + xi];
                                }
                    out.data[((o * Z + z) * Y + y) * X + xx] = acc;
                }
    return out;
}

}  // namespace

TEST(Conv3d, MatchesDirectSum) {
    Rng rng(1);
    auto x = random_var({2, 5, 6, 7}, rng);
    auto w = random_var({3, 2, 3, 3, 3}, rng);
    auto b = random_var({3}, rng);
    const auto y = conv3d(x, w, b);
    const auto ref = conv3d_reference(x.value(), w.value(), b.value());
    ASSERT_EQ(y.shape(), ref.shape);
    for (std::size_t n = 0; n < ref.size(); ++n) EXPECT_NEAR(y.value().data[n], ref.data[n], 1e-12);
}

TEST(Conv3d, Gradients) {
    Rng rng(2);
    auto x = random_var({2, 4, 5, 6}, rng);
    auto w = random_var({3, 2, 3, 3, 3}, rng);
    auto b = random_var({3}, rng);
    auto r = oracle::gradcheck({{"x", x}, {"w", w}, {"b", b}}, [&] { return readout(conv3d(x, w, b), 9); }, 1000, 1);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
    // Anisotropic kernel (the 2D convs of the gating network).
    auto w2 = random_var({2, 2, 1, 3, 3}, rng);
    auto b2 = random_var({2}, rng);
    r = oracle::gradcheck({{"x", x}, {"w", w2}, {"b", b2}}, [&] { return readout(conv3d(x, w2, b2), 3); }, 1000, 1);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
}

TEST(Conv3dDown, OddExtentsUseCeilingAndGradients) {
    Rng rng(3);
    auto x = random_var({2, 5, 4, 7}, rng);
    auto w = random_var({3, 2, 2, 2, 2}, rng);
    auto b = random_var({3}, rng);
    const auto y = conv3d_down(x, w, b);
    EXPECT_EQ(y.shape(), (Shape{3, 3, 2, 4}));
    // Last x output at odd extent sees only the zero-padded tail.
    double acc = b.value().data[0];
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t c = 0; c < 2; ++c)
                acc += w.value().data[(((0 * 2 + i) * 2 + a) * 2 + c) * 2 + 0] *
                       x.value().data[((i * 5 + 2 + a) * 4 + 2 + c) * 7 + 6];
    EXPECT_NEAR(y.value().data[((0 * 3 + 1) * 2 + 1) * 4 + 3], acc, 1e-12);
    auto r = oracle::gradcheck({{"x", x}, {"w", w}, {"b", b}}, [&] { return readout(conv3d_down(x, w, b), 4); }, 1000, 2);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
}

TEST(Conv3dUp, CropsAndGradients) {
    Rng rng(4);
    auto x = random_var({3, 3, 2, 4}, rng);
    auto w = random_var({2, 3, 2, 2, 2}, rng);
    auto b = random_var({2}, rng);
    const auto y = conv3d_up(x, w, b, {5, 4, 7});
    EXPECT_EQ(y.shape(), (Shape{2, 5, 4, 7}));
    EXPECT_THROW(conv3d_up(x, w, b, {8, 4, 7}), ShapeError);
    auto r = oracle::gradcheck({{"x", x}, {"w", w}, {"b", b}},
                               [&] { return readout(conv3d_up(x, w, b, {5, 4, 7}), 5); }, 1000, 3);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
}

TEST(Conv3dUp, IsAdjointOfDown) {
    // <down(x), y> = <x, up(y)> for matching weights without bias.
    Rng rng(5);
    auto x = random_var({2, 5, 6, 7}, rng, false);
    auto yv = random_var({3, 3, 3, 4}, rng, false);
    auto wd = random_var({3, 2, 2, 2, 2}, rng, false);
    Tensor<double> wu(Shape{2, 3, 2, 2, 2});
    for (std::size_t o = 0; o < 3; ++o)
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t k = 0; k < 8; ++k) wu.data[(i * 3 + o) * 8 + k] = wd.value().data[(o * 2 + i) * 8 + k];
    const auto zb3 = Var<double>::leaf(Tensor<double>(Shape{3})), zb2 = Var<double>::leaf(Tensor<double>(Shape{2}));
    const auto d = conv3d_down(x, wd, zb3);
    const auto u = conv3d_up(yv, Var<double>::leaf(wu), zb2, {5, 6, 7});
    double lhs = 0, rhs = 0;
    for (std::size_t n = 0; n < d.value().size(); ++n) lhs += d.value().data[n] * yv.value().data[n];
    for (std::size_t n = 0; n < u.value().size(); ++n) rhs += u.value().data[n] * x.value().data[n];
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Elementwise, Gradients) {
    Rng rng(6);
    auto a = random_var({2, 3, 4, 5}, rng);
    auto b = random_var({2, 3, 4, 5}, rng);
    auto r = oracle::gradcheck({{"a", a}, {"b", b}},
                               [&] { return readout(sigmoid(add(relu(a), scale(b, 0.7))), 6); }, 1000, 4);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
}

TEST(WeightedSum, ValuesAndGradients) {
    Rng rng(7);
    std::vector<Var<double>> xs{random_var({4}, rng), random_var({4}, rng), random_var({4}, rng)};
    auto alpha = Var<double>::leaf(Tensor<double>(Shape{3}, {0.2, 0.5, 0.3}), true);
    const auto y = weighted_sum(xs, alpha);
    for (std::size_t n = 0; n < 4; ++n) {
        EXPECT_NEAR(y.value().data[n],
                    0.2 * xs[0].value().data[n] + 0.5 * xs[1].value().data[n] + 0.3 * xs[2].value().data[n], 1e-15);
    }
    auto r = oracle::gradcheck({{"x0", xs[0]}, {"x1", xs[1]}, {"x2", xs[2]}, {"alpha", alpha}},
                               [&] { return readout(weighted_sum(xs, alpha), 7); }, 100, 5);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
    EXPECT_THROW(weighted_sum({xs[0], xs[1]}, alpha), ShapeError);
}

TEST(MaxpoolLinearSoftmax, Gradients) {
    Rng rng(8);
    auto x = random_var({2, 1, 4, 6}, rng);
    auto w = random_var({3, 12}, rng);
    auto b = random_var({3}, rng);
    const auto p = maxpool2d(x);
    EXPECT_EQ(p.shape(), (Shape{2, 1, 2, 3}));
    auto r = oracle::gradcheck({{"x", x}, {"w", w}, {"b", b}},
                               [&] { return readout(softmax(linear(maxpool2d(x), w, b)), 8); }, 1000, 6);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
}

TEST(Softmax, SimplexAndUniform) {
    auto z = Var<double>::leaf(Tensor<double>(Shape{3}, {0.0, 0.0, 0.0}));
    const auto u = softmax(z);
    for (double v : u.value().data) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
    auto big = Var<double>::leaf(Tensor<double>(Shape{3}, {1000.0, -1000.0, 0.0}));
    const auto s = softmax(big).value().data;  // copy
    EXPECT_NEAR(s[0] + s[1] + s[2], 1.0, 1e-15);
    EXPECT_GE(s[1], 0.0);
}

TEST(Bce, AnalyticValues) {
    const Tensor<double> labels(Shape{4}, {0.0, 1.0, 1.0, 0.0});
    auto half = Var<double>::leaf(Tensor<double>(Shape{4}, 0.5));
    EXPECT_NEAR(bce_loss(half, labels).value().data[0], std::log(2.0), 1e-15);
    auto one = Var<double>::leaf(Tensor<double>(Shape{1}, 0.9));
    EXPECT_NEAR(bce_loss(one, Tensor<double>(Shape{1}, 1.0)).value().data[0], -std::log(0.9), 1e-15);
    auto exact = Var<double>::leaf(labels);
    EXPECT_LT(bce_loss(exact, labels).value().data[0], 2e-7);
    EXPECT_THROW(bce_loss(one, labels), ShapeError);
}

TEST(Bce, Gradients) {
    Rng rng(9);
    Tensor<double> p(Shape{10}), y(Shape{10});
    for (std::size_t n = 0; n < 10; ++n) {
        p.data[n] = rng.uniform(0.05, 0.95);
        y.data[n] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    auto pv = Var<double>::leaf(p, true);
    auto r = oracle::gradcheck({{"p", pv}}, [&] { return bce_loss(pv, y); }, 100, 7);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
}

TEST(Bce, LogitFormMatchesComposedForm) {
    Rng rng(19);
    Tensor<double> z(Shape{12}), y(Shape{12});
    for (std::size_t n = 0; n < 12; ++n) {
        z.data[n] = rng.uniform(-4.0, 4.0);
        y.data[n] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    auto zv = Var<double>::leaf(z, true);
    EXPECT_NEAR(bce_with_logits(zv, y).value().data[0], bce_loss(sigmoid(zv), y).value().data[0], 1e-14);
    auto r = oracle::gradcheck({{"z", zv}}, [&] { return bce_with_logits(zv, y); }, 100, 7);
    EXPECT_LT(r.max_rel, 1e-6) << r.worst;
}

TEST(Bce, LogitFormKeepsGradientWhenSaturated) {
    // p = σ(−40) is far below the clamp: the composed form has no gradient left.
    auto z = Var<double>::leaf(Tensor<double>(Shape{1}, -40.0), true);
    const Tensor<double> y(Shape{1}, 1.0);
    auto loss = bce_with_logits(z, y);
    EXPECT_NEAR(loss.value().data[0], -std::log(kBceEpsilon), 1e-9);
    backward(loss);
    EXPECT_NEAR(z.grad().data[0], -1.0, 1e-12);
}

TEST(SumSquares, Gradients) {
    Rng rng(10);
    auto a = random_var({3, 2}, rng), b = random_var({5}, rng);
    auto r = oracle::gradcheck({{"a", a}, {"b", b}}, [&] { return sum_squares<double>({a, b}); }, 100, 8);
    EXPECT_LT(r.max_rel, 1e-5) << r.worst;
}

TEST(Autodiff, NoGradGuardSkipsGraph) {
    Rng rng(11);
    auto a = random_var({4}, rng);
    NoGradGuard g;
    const auto y = relu(a);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(y.node()->parents.empty());
}

TEST(Subsample, EveryStrideSample) {
    Tensor<double> x(Shape{1, 1, 8, 8});
    for (std::size_t n = 0; n < 64; ++n) x.data[n] = static_cast<double>(n);
    const auto s = subsample2d(x, 4);
    EXPECT_EQ(s.shape, (Shape{1, 1, 2, 2}));
    EXPECT_EQ(s.data, (std::vector<double>{0, 4, 32, 36}));
    EXPECT_THROW(subsample2d(x, 3), ShapeError);
}
