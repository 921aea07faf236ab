#include <gtest/gtest.h>

#include <cmath>

#include "holodsn/core/rng.hpp"
#include "holodsn/nn/checkpoint.hpp"
#include "holodsn/nn/param_count.hpp"
#include "holodsn/nn/train.hpp"
#include "oracles/gradcheck.hpp"
#include "oracles/layer_tables.hpp"
#include "test_util.hpp"

using namespace holodsn;
using namespace holodsn::nn;

namespace {

RealVolume random_patch(std::size_t nx, std::size_t ny, std::size_t nz, Rng& rng) {
    RealVolume v(GridSpec{nx, ny, nz, 1, 1, 1});
    for (auto& x : v.data) x = rng.normal();
    return v;
}

ModelSpec small_dsn_spec() {
    ModelSpec s = ModelSpec::preset(ModelKind::Dsn, Scale::Desk);
    s.gtn.patch = 16;
    return s;
}

double max_rel_diff(const Tensor<double>& a, const Tensor<double>& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        m = std::max(m, std::abs(a.data[n] - b.data[n]) / std::max(std::abs(b.data[n]), 1e-300));
    }
    return m;
}

}  // namespace

TEST(VNetConfig, PresetsValidate) {
    for (const auto& c : {VNetConfig::full(), VNetConfig::full3x(), VNetConfig::desk(), VNetConfig::desk3x()}) {
        EXPECT_NO_THROW(c.validate());
        EXPECT_EQ(c.layers.size(), 19u);
        EXPECT_EQ(c.layers.back().out_channels, 1u);
    }
    EXPECT_EQ(VNetConfig::desk().channels(), (std::array<std::size_t, 5>{2, 4, 8, 16, 32}));
}

TEST(VNetConfig, RejectsBrokenChains) {
    auto c = VNetConfig::desk();
    c.layers[4].in_channels = 5;
    EXPECT_THROW(c.validate(), ShapeError);
    c = VNetConfig::desk();
    c.layers[10].out_channels = 3;
    c.layers[11].in_channels = 3;
    c.layers[11].out_channels = 3;
    c.layers[12].in_channels = 3;
    EXPECT_THROW(c.validate(), ShapeError);
    c = VNetConfig::desk();
    c.layers.pop_back();
    EXPECT_THROW(c.validate(), ShapeError);
    c = VNetConfig::desk();
    c.layers[2].kernel = {3, 3, 3};
    EXPECT_THROW(c.validate(), ShapeError);
}

TEST(ParamCount, GeneralistListingTotals) {
    const auto& rows = oracle::generalist_table();
    const auto cfg = VNetConfig::full();
    for (std::size_t l = 0; l < rows.size(); ++l) {
        EXPECT_EQ(count_layer(cfg.layers[l], CountConvention::KernelPlusOne), rows[l].total) << "layer " << l + 1;
        EXPECT_EQ(count_layer(oracle::as_layers(rows)[l], CountConvention::KernelPlusOne), rows[l].total);
    }
    EXPECT_EQ(count_layer(cfg.layers[0], CountConvention::KernelPlusOne), 448u);
    EXPECT_EQ(count_params(cfg, CountConvention::KernelPlusOne), oracle::kGeneralistTotal);
    // Standard convention: k·Cin·Cout + Cout per layer.
    std::uint64_t standard = 0;
    for (const auto& L : cfg.layers) standard += L.kernel_volume() * L.in_channels * L.out_channels + L.out_channels;
    EXPECT_EQ(count_params(cfg, CountConvention::Standard), standard);
}

TEST(ParamCount, WideGeneralistListing) {
    const auto& rows = oracle::generalist3x_table();
    EXPECT_EQ(count_params(oracle::as_layers(rows), CountConvention::KernelPlusOne), oracle::kGeneralist3xTotal);
    const auto cfg = VNetConfig::full3x();
    for (std::size_t l = 0; l + 1 < rows.size(); ++l) {
        EXPECT_EQ(count_layer(cfg.layers[l], CountConvention::KernelPlusOne), rows[l].total) << "layer " << l + 1;
    }
    // The listing's output row has 16 input channels; the buildable network has 28.
    EXPECT_EQ(count_layer(cfg.layers.back(), CountConvention::KernelPlusOne), 56u);
    EXPECT_EQ(count_params(cfg, CountConvention::KernelPlusOne), oracle::kGeneralist3xTotal + 24);
}

TEST(Init, XavierBoundAndDeterminism) {
    EXPECT_DOUBLE_EQ(xavier_bound({16, 16, 3, 3, 3}), std::sqrt(6.0 / (27 * 16 + 27 * 16)));
    EXPECT_DOUBLE_EQ(xavier_bound({3, 256}), std::sqrt(6.0 / 259.0));
    const auto spec = ModelSpec::preset(ModelKind::Dsn, Scale::Desk);
    const auto a = init_model<double>(spec, 5), b = init_model<double>(spec, 5), c = init_model<double>(spec, 6);
    const auto pa = a.named_parameters(), pb = b.named_parameters(), pc = c.named_parameters();
    ASSERT_EQ(pa.size(), 3u * 38u + 6u);
    bool differs = false;
    for (std::size_t k = 0; k < pa.size(); ++k) {
        EXPECT_EQ(pa[k].second.value(), pb[k].second.value());
        differs = differs || !(pa[k].second.value() == pc[k].second.value());
        const auto& s = pa[k].second.shape();
        if (s.size() == 1) {
            for (double v : pa[k].second.value().data) EXPECT_EQ(v, 0.0);
        } else {
            const double bound = xavier_bound(s);
            for (double v : pa[k].second.value().data) EXPECT_LE(std::abs(v), bound);
        }
    }
    EXPECT_TRUE(differs);
}

TEST(Init, PretrainedExperts) {
    const auto spec = ModelSpec::preset(ModelKind::Dsn, Scale::Desk);
    Rng rng(1);
    std::vector<ExpertParams<double>> experts;
    for (int i = 0; i < 2; ++i) experts.push_back(init_expert<double>(spec.vnet, rng));
    EXPECT_THROW(init_dsn_from_experts(spec, experts, 1), ShapeError);
    experts.push_back(init_expert<double>(VNetConfig::desk3x(), rng));
    EXPECT_THROW(init_dsn_from_experts(spec, experts, 1), ShapeError);
    experts.back() = init_expert<double>(spec.vnet, rng);
    const auto m = init_dsn_from_experts(spec, experts, 1);
    EXPECT_EQ(m.dsn.experts[2].decoder[3].weight.value(), experts[2].decoder[3].weight.value());
}

TEST(Expert, ShapesRangeAndPurity) {
    Rng rng(2);
    const auto p = init_expert<double>(VNetConfig::desk(), rng);
    const auto patch = random_patch(24, 20, 17, rng);
    const auto a = expert_forward(p, patch);
    const auto b = expert_forward(p, patch);
    EXPECT_EQ(a.prob.shape(), (Shape{1, 17, 20, 24}));
    EXPECT_EQ(a.prob.value(), b.prob.value());
    for (double v : a.prob.value().data) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
    const auto dims = scale_dims(17, 20, 24);
    const auto ch = VNetConfig::desk().channels();
    for (std::size_t s = 0; s < kScales; ++s) {
        EXPECT_EQ(a.features.maps[s].shape(), (Shape{ch[s], dims[s][0], dims[s][1], dims[s][2]})) << s;
    }
    EXPECT_THROW(expert_forward(p, random_patch(8, 32, 32, rng)), ShapeError);
}

TEST(Expert, FullScaleBottleneck) {
    const auto dims = scale_dims(100, 128, 128);
    EXPECT_EQ(dims[4], (std::array<std::size_t, 3>{7, 8, 8}));
    EXPECT_EQ(VNetConfig::full().channels()[4], 256u);
}

TEST(Gtn, SimplexZeroFcAndShapes) {
    Rng rng(3);
    auto g = init_gtn<double>(GtnConfig::desk(), rng);
    for (int t = 0; t < 20; ++t) {
        const auto a = gtn_forward(g, random_patch(64, 64, 1, rng)).value().data;
        ASSERT_EQ(a.size(), 3u);
        EXPECT_NEAR(a[0] + a[1] + a[2], 1.0, 1e-6);
        for (double v : a) EXPECT_GE(v, 0.0);
    }
    std::fill(g.fc_w.mutable_value().data.begin(), g.fc_w.mutable_value().data.end(), 0.0);
    const auto uniform = gtn_forward(g, random_patch(64, 64, 1, rng));
    for (double v : uniform.value().data) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
    EXPECT_THROW(gtn_forward(g, random_patch(32, 64, 1, rng)), ShapeError);
    const auto full = GtnConfig::full();
    EXPECT_EQ(full.patch / full.stride, 32u);
    EXPECT_EQ(full.pooled(), 8u);
    EXPECT_EQ(full.fc_in(), 8u * 8u * 64u);
}

TEST(Synthesis, FeatureIdentityConvexityLinearity) {
    Rng rng(4);
    const auto p = init_expert<double>(VNetConfig::desk(), rng);
    const auto f = expert_forward(p, random_patch(16, 16, 16, rng)).features;
    auto alpha = [](double a, double b, double c) { return Var<double>::leaf(Tensor<double>(Shape{3}, {a, b, c})); };
    // Identity: α = e₁ reproduces F₁.
    FeatureSet<double> g;
    for (std::size_t s = 0; s < kScales; ++s) g.maps[s] = scale(f.maps[s], 2.0);
    auto out = synthesize_features<double>({f, g, g}, alpha(1, 0, 0));
    for (std::size_t s = 0; s < kScales; ++s) EXPECT_EQ(out.maps[s].value(), f.maps[s].value());
    // Equal inputs are reproduced for any α.
    out = synthesize_features<double>({f, f, f}, alpha(0.2, 0.3, 0.5));
    for (std::size_t s = 0; s < kScales; ++s) {
        for (std::size_t n = 0; n < f.maps[s].value().size(); ++n) {
            EXPECT_NEAR(out.maps[s].value().data[n], f.maps[s].value().data[n], 1e-12);
        }
    }
    // Linearity on scaled copies: a=1, b=2, c=-1 with α=(.2,.3,.5) → 0.3·F.
    FeatureSet<double> h;
    for (std::size_t s = 0; s < kScales; ++s) h.maps[s] = scale(f.maps[s], -1.0);
    out = synthesize_features<double>({f, g, h}, alpha(0.2, 0.3, 0.5));
    for (std::size_t s = 0; s < kScales; ++s) {
        for (std::size_t n = 0; n < f.maps[s].value().size(); ++n) {
            EXPECT_NEAR(out.maps[s].value().data[n], 0.3 * f.maps[s].value().data[n], 1e-12);
        }
    }
    EXPECT_THROW(synthesize_features<double>({f, g}, alpha(1, 0, 0)), ShapeError);
}

TEST(Synthesis, DecoderIdentityAndCancellation) {
    Rng rng(5);
    const auto cfg = VNetConfig::desk();
    const auto p1 = init_expert<double>(cfg, rng), p2 = init_expert<double>(cfg, rng);
    auto neg = init_expert<double>(cfg, rng);
    for (std::size_t l = 0; l < neg.decoder.size(); ++l) {
        neg.decoder[l].weight = scale(p1.decoder[l].weight, -1.0);
        neg.decoder[l].bias = scale(p1.decoder[l].bias, -1.0);
    }
    auto a = Var<double>::leaf(Tensor<double>(Shape{3}, {0.0, 1.0, 0.0}));
    auto d = synthesize_decoder<double>({p1.decoder, p2.decoder, p1.decoder}, a);
    for (std::size_t l = 0; l < d.size(); ++l) EXPECT_EQ(d[l].weight.value(), p2.decoder[l].weight.value());
    a = Var<double>::leaf(Tensor<double>(Shape{3}, {0.5, 0.5, 0.0}));
    d = synthesize_decoder<double>({p1.decoder, neg.decoder, p2.decoder}, a);
    for (const auto& lp : d) {
        for (double v : lp.weight.value().data) EXPECT_EQ(v, 0.0);
    }
    // Convex hull: every synthesized entry lies between the expert entries.
    a = Var<double>::leaf(Tensor<double>(Shape{3}, {0.1, 0.6, 0.3}));
    d = synthesize_decoder<double>({p1.decoder, p2.decoder, neg.decoder}, a);
    for (std::size_t l = 0; l < d.size(); ++l) {
        for (std::size_t n = 0; n < d[l].weight.value().size(); ++n) {
            const double x = p1.decoder[l].weight.value().data[n], y = p2.decoder[l].weight.value().data[n],
                         z = neg.decoder[l].weight.value().data[n];
            EXPECT_GE(d[l].weight.value().data[n], std::min({x, y, z}) - 1e-15);
            EXPECT_LE(d[l].weight.value().data[n], std::max({x, y, z}) + 1e-15);
        }
    }
}

TEST(Dsn, BasisAlphaMatchesSingleExpert) {
    Rng rng(6);
    const auto m = init_model<double>(small_dsn_spec(), 7);
    const auto patch = random_patch(16, 16, 16, rng), holo = random_patch(16, 16, 1, rng);
    for (std::size_t e = 0; e < kExperts; ++e) {
        Tensor<double> basis(Shape{3}, 0.0);
        basis.data[e] = 1.0;
        const auto d = dsn_forward(m.dsn, patch, holo, basis);
        const auto s = expert_forward(m.dsn.experts[e], patch);
        EXPECT_LT(max_rel_diff(d.prob.value(), s.prob.value()), 1e-12);
    }
    // Float32 instance of the same check.
    const auto mf = init_model<float>(small_dsn_spec(), 7);
    Tensor<float> basis(Shape{3}, 0.0f);
    basis.data[1] = 1.0f;
    const auto d = dsn_forward(mf.dsn, patch, holo, basis);
    const auto s = expert_forward(mf.dsn.experts[1], patch);
    for (std::size_t n = 0; n < d.prob.value().size(); ++n) {
        EXPECT_NEAR(d.prob.value().data[n], s.prob.value().data[n], 1e-6 * s.prob.value().data[n]);
    }
}

TEST(Dsn, IdenticalExpertsAnyAlpha) {
    Rng rng(7);
    auto m = init_model<double>(small_dsn_spec(), 8);
    m.dsn.experts[1] = m.dsn.experts[0];
    m.dsn.experts[2] = m.dsn.experts[0];
    const auto patch = random_patch(16, 16, 16, rng), holo = random_patch(16, 16, 1, rng);
    const auto d = dsn_forward(m.dsn, patch, holo);
    const auto s = expert_forward(m.dsn.experts[0], patch);
    EXPECT_LT(max_rel_diff(d.prob.value(), s.prob.value()), 1e-12);
    for (double v : d.prob.value().data) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
    double sum = 0;
    for (double a : d.alpha.value().data) sum += a;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_THROW(dsn_forward(m.dsn, patch, holo, Tensor<double>(Shape{3}, {0.5, 0.6, 0.0})), ShapeError);
}

TEST(Gradients, FullDsnIncludingGatingPath) {
    Rng rng(8);
    const auto m = init_model<double>(small_dsn_spec(), 9);
    // Zero biases put untouched ReLU inputs exactly on the kink; move them off it.
    for (auto [_, v] : m.named_parameters()) {
        if (v.shape().size() == 1) {
            for (auto& b : v.mutable_value().data) b = 0.05 * rng.normal();
        }
    }
    const auto patch = random_patch(16, 16, 16, rng), holo = random_patch(16, 16, 1, rng);
    Tensor<double> label(Shape{1, 16, 16, 16});
    for (auto& y : label.data) y = rng.uniform() < 0.1 ? 1.0 : 0.0;
    const auto params = m.named_parameters();
    std::vector<Var<double>> ws;
    for (const auto& [_, v] : params) ws.push_back(v);
    auto loss = [&] {
        auto out = m.forward(Var<double>::leaf(to_tensor<double>(patch)), holo_tensor<double>(holo));
        return add(bce_loss(out.prob, label), scale(sum_squares(ws), 1e-3));
    };
    const auto r = oracle::gradcheck(params, loss, 3, 10);
    EXPECT_LT(r.max_rel, 1e-4) << r.worst << " (" << r.checked << " entries)";
    // The gating weights receive gradient through α.
    bool gtn_grad = false;
    for (const auto& [name, v] : params) {
        if (name.rfind("gtn.", 0) == 0) {
            for (double g : v.grad().data) gtn_grad = gtn_grad || g != 0.0;
        }
    }
    EXPECT_TRUE(gtn_grad);
}

TEST(Checkpoint, RoundtripAndShapeErrors) {
    testutil::TempDir tmp;
    const auto m = init_model<double>(ModelSpec::preset(ModelKind::Dsn, Scale::Desk), 3);
    save_checkpoint(tmp / "m.hpar", m, {12, 3, 0.25});
    CheckpointMeta meta;
    const auto back = load_checkpoint<double>(tmp / "m.hpar", &meta);
    EXPECT_EQ(meta.iteration, 12u);
    EXPECT_EQ(meta.loss, 0.25);
    EXPECT_EQ(back.spec.kind, ModelKind::Dsn);
    const auto a = m.named_parameters(), b = back.named_parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].second.value(), b[k].second.value());
    // Tensor file from one model with the manifest of another.
    const auto e = init_model<double>(ModelSpec::preset(ModelKind::Generalist3x, Scale::Desk), 3);
    save_checkpoint(tmp / "e.hpar", e, {});
    std::filesystem::copy_file(tmp / "m.json", tmp / "e.json", std::filesystem::copy_options::overwrite_existing);
    EXPECT_THROW(load_checkpoint<double>(tmp / "e.hpar"), ShapeError);
    auto bytes = read_bytes(tmp / "m.hpar");
    bytes.resize(bytes.size() / 2);
    write_bytes(tmp / "m.hpar", bytes);
    EXPECT_THROW(load_checkpoint<double>(tmp / "m.hpar"), FormatError);
}

namespace {

/// Patches with one bright blob in the input marking the labelled voxels.
std::vector<TrainingPair> blob_patches(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TrainingPair> out;
    const GridSpec g{16, 16, 16, 1, 1, 1};
    for (std::size_t n = 0; n < count; ++n) {
        TrainingPair p;
        p.input = RealVolume(g);
        p.label = BinaryVolume(g, 0);
        p.hologram = RealVolume(g.lateral_slice());
        for (auto& x : p.input.data) x = 0.3 * rng.normal();
        const std::size_t cx = 4 + rng.below(8), cy = 4 + rng.below(8), cz = 4 + rng.below(8);
        for (std::size_t k = cz - 1; k <= cz + 1; ++k)
            for (std::size_t j = cy - 1; j <= cy + 1; ++j)
                for (std::size_t i = cx - 1; i <= cx + 1; ++i) {
                    p.input.at(i, j, k) += 2.0;
                    p.label.at(i, j, k) = 1;
                }
        for (auto& x : p.hologram.data) x = rng.normal();
        p.volume_id = "blob" + std::to_string(n);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

TEST(Train, TinyExpertHalvesLoss) {
    auto m = init_model<double>(ModelSpec::preset(ModelKind::Expert, Scale::Desk), 1);
    const auto data = blob_patches(20, 2);
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.batch = 1;
    cfg.max_iters = 200;
    const double before = evaluate_loss(m, data);
    const auto res = train(m, data, {}, cfg);
    ASSERT_EQ(res.log.size(), 200u);
    const double after = evaluate_loss(m, data);
    EXPECT_LT(after, 0.5 * before) << "initial " << before << " final " << after;
}

TEST(Train, DecayShrinksWeightsAndIsDeterministic) {
    const auto data = blob_patches(4, 3);
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch = 1;
    cfg.max_iters = 30;
    auto plain = init_model<double>(ModelSpec::preset(ModelKind::Expert, Scale::Desk), 4);
    auto decayed = init_model<double>(ModelSpec::preset(ModelKind::Expert, Scale::Desk), 4);
    auto again = init_model<double>(ModelSpec::preset(ModelKind::Expert, Scale::Desk), 4);
    const auto a = train(plain, data, {}, cfg);
    cfg.gamma = 1.0;  // strong enough to dominate 30 steps at this scale
    const auto b = train(decayed, data, {}, cfg);
    const auto c = train(again, data, {}, cfg);
    EXPECT_LT(squared_norm(decayed), squared_norm(plain));
    bool logs_differ = false;
    for (std::size_t k = 0; k < a.log.size(); ++k) logs_differ = logs_differ || a.log[k].total() != b.log[k].total();
    EXPECT_TRUE(logs_differ);
    for (std::size_t k = 0; k < b.log.size(); ++k) EXPECT_EQ(b.log[k].total(), c.log[k].total());
    EXPECT_GT(b.log[0].l2, 0.0);
}

TEST(Train, ValidationSelectsBestAndLogs) {
    testutil::TempDir tmp;
    const auto data = blob_patches(6, 4);
    auto m = init_model<double>(ModelSpec::preset(ModelKind::Expert, Scale::Desk), 5);
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.batch = 2;
    cfg.max_iters = 10;
    cfg.val_every = 2;
    const std::vector<TrainingPair> val(data.begin(), data.begin() + 2);
    const auto res = train(m, data, val, cfg);
    EXPECT_EQ(res.validation.size(), 5u);
    double best = 1e300;
    for (const auto& [it, v] : res.validation) best = std::min(best, v);
    EXPECT_EQ(res.best_validation, best);
    EXPECT_NEAR(evaluate_loss(m, val), best, 1e-12);
    write_loss_csv(tmp / "loss.csv", res.log);
    const auto text = read_bytes(tmp / "loss.csv");
    EXPECT_EQ(std::string(text.begin(), text.begin() + 22), "iteration,bce,l2,total");
}

TEST(Train, NonFiniteLossAborts) {
    auto data = blob_patches(2, 5);
    data[1].input.data[7] = std::nan("");
    auto m = init_model<double>(ModelSpec::preset(ModelKind::Expert, Scale::Desk), 6);
    TrainConfig cfg;
    cfg.batch = 2;
    cfg.max_iters = 3;
    EXPECT_THROW(train(m, data, {}, cfg), NumericalError);
}
