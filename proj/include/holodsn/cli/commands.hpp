#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "holodsn/cli/config.hpp"
#include "holodsn/core/hvol_io.hpp"
#include "holodsn/evaluate/evaluate.hpp"
#include "holodsn/evaluate/report.hpp"
#include "holodsn/evaluate/weights.hpp"
#include "holodsn/fieldgen/particles.hpp"
#include "holodsn/fieldgen/voxelize.hpp"
#include "holodsn/holoback/backprop.hpp"
#include "holodsn/nn/checkpoint.hpp"
#include "holodsn/nn/train.hpp"
#include "holodsn/pipeline/dataset.hpp"
#include "holodsn/pipeline/normalize.hpp"
#include "holodsn/pipeline/patches.hpp"
#include "holodsn/wavesim/bpm.hpp"

namespace holodsn::cli {

namespace fs = std::filesystem;

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

/// splitmix64 finalizer over (seed, stream, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream * 0x100000001B3ULL + index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t { kSeedField = 1, kSeedNoise = 2, kSeedInit = 3, kSeedShuffle = 4 };

struct VolumeInfo {
    std::size_t index = 0;
    std::string id;
    Split split = Split::Train;
    double density = 0.0;
    std::string group;
};

inline std::string group_name(double density) {
    std::ostringstream os;
    os << "rho=" << density;
    return os.str();
}

inline std::vector<VolumeInfo> volume_plan(const RunConfig& c) {
    std::vector<VolumeInfo> out;
    for (std::size_t v = 0; v < c.volume_count(); ++v) {
        VolumeInfo info;
        info.index = v;
        char buf[32];
        std::snprintf(buf, sizeof buf, "vol_%04zu", v);
        info.id = buf;
        info.split = v < c.volumes_train ? Split::Train
                     : v < c.volumes_train + c.volumes_val ? Split::Val
                                                            : Split::Test;
        info.density = c.density[v % c.density.size()];
        info.group = group_name(info.density);
        out.push_back(info);
    }
    return out;
}

/// Artifact locations inside the run directory.
struct RunPaths {
    fs::path root;
    [[nodiscard]] fs::path config() const { return root / "config.txt"; }
    [[nodiscard]] fs::path field(const std::string& id) const { return root / "fields" / (id + ".jsonl"); }
    [[nodiscard]] fs::path hologram(const std::string& id) const { return root / "holograms" / (id + ".hvol"); }
    [[nodiscard]] fs::path backprop(const std::string& id) const { return root / "backprop" / (id + ".hvol"); }
    [[nodiscard]] fs::path input(const std::string& id) const { return root / "preprocess" / (id + "_input.hvol"); }
    [[nodiscard]] fs::path holo_norm(const std::string& id) const { return root / "preprocess" / (id + "_holo.hvol"); }
    [[nodiscard]] fs::path label(const std::string& id) const { return root / "preprocess" / (id + "_label.hvol"); }
    [[nodiscard]] fs::path manifest(Split s) const { return root / "preprocess" / (std::string(split_name(s)) + ".json"); }
    [[nodiscard]] fs::path model() const { return root / "model" / "model.hpar"; }
    [[nodiscard]] fs::path loss_csv() const { return root / "model" / "loss.csv"; }
    [[nodiscard]] fs::path train_summary() const { return root / "model" / "summary.json"; }
    [[nodiscard]] fs::path prob(const std::string& id) const { return root / "infer" / (id + "_prob.hvol"); }
    [[nodiscard]] fs::path alpha_csv() const { return root / "infer" / "alpha.csv"; }
    [[nodiscard]] fs::path match(const std::string& id) const { return root / "eval" / (id + "_match.json"); }
    [[nodiscard]] fs::path eval_ji() const { return root / "eval" / "ji.csv"; }
    [[nodiscard]] fs::path report_ji() const { return root / "report" / "ji.csv"; }
    [[nodiscard]] fs::path report_svg() const { return root / "report" / "ji.svg"; }
    [[nodiscard]] fs::path report_alpha() const { return root / "report" / "alpha_stats.csv"; }
};

inline void require(const fs::path& p) {
    if (!fs::exists(p)) throw MissingInputError("missing input: " + p.string());
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; the first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

inline Vec3 sample_dims(const RunConfig& c) {
    return {static_cast<double>(c.nx) * c.lateral_pitch, static_cast<double>(c.ny) * c.lateral_pitch,
            c.sample_depth()};
}

/// Fine simulation grid covering the sample depth.
inline GridSpec sim_grid(const RunConfig& c) {
    const double dz = c.bpm_pitch();
    const auto nz = static_cast<std::size_t>(std::ceil(c.sample_depth() / dz - 1e-9));
    return {c.nx, c.ny, nz, c.lateral_pitch, c.lateral_pitch, dz};
}

/// Grid of the backpropagated volume, labels and probability maps.
inline GridSpec coarse_grid(const RunConfig& c) {
    return {c.nx, c.ny, c.backprop_nz, c.lateral_pitch, c.lateral_pitch, c.backprop_dz};
}

/// The hologram sits half a backprop slice beyond the exit face, so that backprop
/// slice k (distance (k+1)·dz) lands on the center of label slice k.
inline OpticalConfig optics(const RunConfig& c) {
    OpticalConfig o;
    o.wavelength = c.wavelength;
    o.n_medium = c.n_medium;
    o.band_limit = c.band_limit;
    o.standoff = 0.5 * c.backprop_dz;
    return o;
}

inline nn::ModelSpec model_spec(const RunConfig& c) {
    auto spec = nn::ModelSpec::preset(nn::parse_kind(c.model), nn::parse_scale(c.scale));
    spec.gtn.patch = c.patch;
    spec.gtn.validate();
    if (spec.kind == nn::ModelKind::Dsn && (c.patch % (spec.gtn.stride * 4) != 0)) {
        throw ConfigError("key 'patch': the gating network needs a multiple of " +
                          std::to_string(spec.gtn.stride * 4));
    }
    return spec;
}

inline void echo_config(const RunConfig& c) { write_text(RunPaths{c.run_dir}.config(), config_text(c)); }

// ---------------------------------------------------------------------------

inline void cmd_generate(const RunConfig& c, std::ostream& log) {
    const RunPaths P{c.run_dir};
    const auto plan = volume_plan(c);
    auto list = nlohmann::ordered_json::array();
    for (const auto& v : plan) {
        SamplingParams sp;
        sp.density = v.density;
        sp.dims = sample_dims(c);
        sp.min_dist = c.min_dist;
        sp.diameter = c.diameter;
        sp.index_contrast = c.dn;
        sp.seed = derive_seed(c.seed, kSeedField, v.index);
        const auto field = sample_particles(sp);
        write_field_jsonl(P.field(v.id), field);
        list.push_back({{"id", v.id}, {"split", split_name(v.split)}, {"group", v.group},
                        {"density_per_ul", v.density}, {"seed", sp.seed}, {"particles", field.particles.size()}});
    }
    write_text(P.root / "fields" / "volumes.json", list.dump(2) + "\n");
    log << "generate: " << plan.size() << " particle fields\n";
}

inline void cmd_simulate(const RunConfig& c, std::ostream& log) {
    const RunPaths P{c.run_dir};
    const auto plan = volume_plan(c);
    for (const auto& v : plan) require(P.field(v.id));
    const auto grid = sim_grid(c);
    const auto cfg = optics(c);
    parallel_for(plan.size(), c.threads, [&](std::size_t i) {
        const auto& v = plan[i];
        const auto field = read_field_jsonl(P.field(v.id), c.diameter, c.dn);
        NoiseModel noise;
        noise.kind = c.noise == "poisson" ? NoiseKind::Poisson : c.noise == "gaussian" ? NoiseKind::Gaussian : NoiseKind::None;
        noise.level = c.noise_level;
        noise.seed = derive_seed(c.seed, kSeedNoise, v.index);
        const auto holo = record_hologram(bpm_exit_field(field, grid, cfg), cfg, noise);
        write_hologram(P.hologram(v.id), holo,
                       {{"field", P.field(v.id).filename().string()},
                        {"bpm_slices", grid.nz},
                        {"bpm_dz_um", grid.dz},
                        {"standoff_um", cfg.standoff},
                        {"noise", c.noise}});
    });
    log << "simulate: " << plan.size() << " holograms, " << grid.nz << " slices of " << grid.dz << " um\n";
}

inline void cmd_backprop(const RunConfig& c, std::ostream& log) {
    const RunPaths P{c.run_dir};
    const auto plan = volume_plan(c);
    for (const auto& v : plan) require(P.hologram(v.id));
    BackpropOptions opt;
    opt.nz = c.backprop_nz;
    opt.dz = c.backprop_dz;
    opt.band_limit = c.band_limit;
    opt.subtract_dc = c.subtract_dc;
    parallel_for(plan.size(), c.threads, [&](std::size_t i) {
        const auto& v = plan[i];
        Sidecar meta;
        const auto holo = read_hologram(P.hologram(v.id), &meta);
        const auto vol = backpropagate_volume(holo, opt);
        write_hvol(P.backprop(v.id), vol,
                   Sidecar{holo.wavelength, holo.n_medium,
                           {{"hologram", P.hologram(v.id).filename().string()},
                            {"nz", opt.nz},
                            {"dz_um", opt.dz},
                            {"subtract_dc", opt.subtract_dc}}});
    });
    log << "backprop: " << plan.size() << " volumes of " << c.backprop_nz << " slices\n";
}

inline void cmd_preprocess(const RunConfig& c, std::ostream& log) {
    const RunPaths P{c.run_dir};
    const auto plan = volume_plan(c);
    for (const auto& v : plan) {
        require(P.backprop(v.id));
        require(P.hologram(v.id));
        require(P.field(v.id));
    }
    const auto fine = sim_grid(c);
    const auto coarse = coarse_grid(c);
    std::vector<std::vector<ManifestEntry>> rows(plan.size());
    parallel_for(plan.size(), c.threads, [&](std::size_t i) {
        const auto& v = plan[i];
        const auto input = normalize_volume(read_hvol<std::complex<double>>(P.backprop(v.id)));
        const auto holo = normalize_hologram(read_hologram(P.hologram(v.id)));
        const auto label = make_ground_truth(read_field_jsonl(P.field(v.id), c.diameter, c.dn), fine, coarse);
        write_hvol(P.input(v.id), input);
        write_hvol(P.holo_norm(v.id), holo);
        write_hvol(P.label(v.id), label);
        const bool training = v.split == Split::Train;
        for (const auto& w : crop_patches(c.nx, c.ny, c.patch, training ? c.overlap : 0)) {
            if (training && !c.keep_empty && label_is_empty(crop(label, w))) continue;
            rows[i].push_back({v.id, v.group, fs::relative(P.input(v.id), P.root), fs::relative(P.holo_norm(v.id), P.root),
                               fs::relative(P.label(v.id), P.root), w});
        }
    });
    std::map<Split, std::vector<ManifestEntry>> by_split;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        auto& dst = by_split[plan[i].split];
        dst.insert(dst.end(), rows[i].begin(), rows[i].end());
    }
    for (auto s : {Split::Train, Split::Val, Split::Test}) write_manifest(P.manifest(s), by_split[s]);
    log << "preprocess: " << by_split[Split::Train].size() << " training, " << by_split[Split::Val].size()
        << " validation, " << by_split[Split::Test].size() << " test patches\n";
}

// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
nn::Model<T> initial_model(const RunConfig& c) {
    const auto spec = model_spec(c);
    const auto seed = derive_seed(c.seed, kSeedInit, 0);
    if (c.init == "xavier") return nn::init_model<T>(spec, seed);
    std::vector<nn::ExpertParams<T>> experts;
    for (const auto& path : c.expert_checkpoints) {
        require(path);
        auto m = nn::load_checkpoint<T>(path);
        if (m.is_dsn()) throw ConfigError("expert checkpoint " + path + " holds a DSN");
        experts.push_back(m.single);
    }
    return nn::init_dsn_from_experts<T>(spec, experts, seed);
}

template <typename T>
void train_typed(const RunConfig& c, std::ostream& log) {
    const RunPaths P{c.run_dir};
    require(P.manifest(Split::Train));
    require(P.manifest(Split::Val));
    const auto train_set = load_pairs(read_manifest(P.manifest(Split::Train), P.root));
    const auto val_set = load_pairs(read_manifest(P.manifest(Split::Val), P.root));
    auto model = initial_model<T>(c);
    nn::TrainConfig tc;
    tc.lr = c.lr;
    tc.batch = c.batch;
    tc.gamma = c.gamma;
    tc.max_iters = c.iterations;
    tc.seed = derive_seed(c.seed, kSeedShuffle, 0);
    tc.init = c.init == "xavier" ? nn::InitMode::Xavier : nn::InitMode::PretrainedExperts;
    tc.val_every = c.val_every;
    const double initial_val = nn::evaluate_loss(model, val_set);
    log << "train: " << nn::kind_name(model.spec.kind) << ", " << model.parameters().size() << " tensors, "
        << train_set.size() << " training / " << val_set.size() << " validation patches\n";
    double window = 0.0;
    const std::size_t every = std::max<std::size_t>(1, std::min<std::size_t>(100, c.iterations / 10));
    auto res = nn::train(model, train_set, val_set, tc, [&](const nn::LossRecord& r) {
        window += r.bce;
        if (r.iteration % every == 0) {
            log << "  iter " << r.iteration << "  bce " << window / static_cast<double>(every) << "\n";
            window = 0.0;
        }
    });
    nn::save_checkpoint(P.model(), model, {res.best_iteration, c.seed, res.best_validation});
    write_loss_csv(P.loss_csv(), res.log);
    nlohmann::ordered_json s;
    s["model"] = nn::kind_name(model.spec.kind);
    s["iterations"] = c.iterations;
    s["initial_bce"] = res.log.empty() ? 0.0 : res.log.front().bce;
    s["final_bce"] = res.log.empty() ? 0.0 : res.log.back().bce;
    s["initial_validation"] = initial_val;
    s["best_validation"] = res.best_validation;
    s["best_iteration"] = res.best_iteration;
    auto val = nlohmann::ordered_json::array();
    for (const auto& [it, v] : res.validation) val.push_back({it, v});
    s["validation"] = val;
    write_text(P.train_summary(), s.dump(2) + "\n");
    log << "train: best validation " << res.best_validation << " at iteration " << res.best_iteration << "\n";
}

template <typename T>
void infer_typed(const RunConfig& c, std::ostream& log) {
    const RunPaths P{c.run_dir};
    require(P.model());
    const auto model = nn::load_checkpoint<T>(P.model());
    const auto plan = volume_plan(c);
    std::string alpha = "volume_id,group,x0,y0,a1,a2,a3\n";
    nn::NoGradGuard guard;
    std::size_t done = 0;
    for (const auto& v : plan) {
        if (v.split != Split::Test) continue;
        require(P.input(v.id));
        require(P.holo_norm(v.id));
        const auto input = read_hvol<double>(P.input(v.id));
        const auto holo = read_hvol<double>(P.holo_norm(v.id));
        RealVolume sum(input.grid, 0.0), count(input.grid, 0.0);
        const bool periodic = c.infer_tiling == "periodic";
        const auto windows = periodic ? periodic_patches(c.nx, c.ny, c.patch, c.eval_overlap)
                                      : crop_patches(c.nx, c.ny, c.patch, c.eval_overlap);
        for (const auto& w : windows) {
            auto patch = nn::Var<T>::leaf(nn::to_tensor<T>(periodic ? crop_periodic(input, w) : crop(input, w)));
            const auto h = model.is_dsn() ? nn::holo_tensor<T>(periodic ? crop_periodic(holo, w) : crop(holo, w))
                                          : nn::Tensor<T>{};
            const auto out = model.forward(patch, h);
            const auto& p = out.prob.value().data;
            for (std::size_t k = 0; k < input.grid.nz; ++k)
                for (std::size_t j = 0; j < w.size; ++j)
                    for (std::size_t i = 0; i < w.size; ++i) {
                        const auto src = (k * w.size + j) * w.size + i;
                        const double wt = periodic ? tent_weight(i, w.size) * tent_weight(j, w.size) : 1.0;
                        const auto x = (w.x0 + i) % c.nx, y = (w.y0 + j) % c.ny;
                        sum.at(x, y, k) += wt * static_cast<double>(p[src]);
                        count.at(x, y, k) += wt;
                    }
            if (out.alpha) {
                const auto& a = out.alpha->value().data;
                alpha += v.id + ',' + v.group + ',' + std::to_string(w.x0) + ',' + std::to_string(w.y0);
                for (std::size_t e = 0; e < 3; ++e) alpha += ',' + holodsn::detail::fmt_num(static_cast<double>(a[e]));
                alpha += '\n';
            }
        }
        for (std::size_t n = 0; n < sum.size(); ++n) sum.data[n] /= count.data[n];
        write_hvol(P.prob(v.id), sum, Sidecar{{}, {}, {{"model", "model.hpar"}, {"input", P.input(v.id).filename().string()}}});
        ++done;
    }
    if (model.is_dsn()) write_text(P.alpha_csv(), alpha);
    log << "infer: " << done << " probability volumes\n";
}

}  // namespace detail

inline void cmd_train(const RunConfig& c, std::ostream& log) {
    if (c.precision == "double") {
        detail::train_typed<double>(c, log);
    } else {
        detail::train_typed<float>(c, log);
    }
}

inline void cmd_infer(const RunConfig& c, std::ostream& log) {
    if (c.precision == "double") {
        detail::infer_typed<double>(c, log);
    } else {
        detail::infer_typed<float>(c, log);
    }
}

inline SegmentOptions segment_options(const RunConfig& c) {
    SegmentOptions s;
    if (c.otsu_range == "unit") s.range = {OtsuRange::Kind::Fixed, 0.0, 1.0};
    s.min_voxels = c.min_cluster;
    return s;
}

inline void cmd_eval(const RunConfig& c, std::ostream& log) {
    const RunPaths P{c.run_dir};
    std::vector<MatchReport> reports;
    for (const auto& v : volume_plan(c)) {
        if (v.split != Split::Test) continue;
        require(P.prob(v.id));
        require(P.field(v.id));
        const auto prob = read_hvol<double>(P.prob(v.id));
        const auto truth = read_field_jsonl(P.field(v.id), c.diameter, c.dn);
        auto r = evaluate_volume(prob, truth, segment_options(c), {c.gate_a, c.gate_b, c.gate_c});
        write_match_report(P.match(v.id), r);
        reports.push_back(std::move(r));
    }
    const auto curve = jaccard_curve(reports, c.backprop_nz, c.backprop_dz, c.ji_bin_slices);
    write_text(P.eval_ji(), ji_csv(curve));
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& r : reports) tp += r.tp, fp += r.fp, fn += r.fn;
    log << "eval: " << reports.size() << " volumes, TP " << tp << " FP " << fp << " FN " << fn << "\n";
}

/// Alpha rows of infer/alpha.csv grouped by condition.
inline std::map<std::string, std::vector<Alpha>> read_alpha_csv(const fs::path& path) {
    std::map<std::string, std::vector<Alpha>> groups;
    std::istringstream is(read_text(path));
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string item;
        std::istringstream ls(line);
        while (std::getline(ls, item, ',')) f.push_back(item);
        if (f.size() != 7) throw FormatError(path.string() + ": expected 7 columns");
        try {
            groups[f[1]].push_back({std::stod(f[4]), std::stod(f[5]), std::stod(f[6])});
        } catch (const std::exception&) {
            throw FormatError(path.string() + ": bad number in '" + line + "'");
        }
    }
    return groups;
}

inline void cmd_report(const RunConfig& c, std::ostream& log) {
    const RunPaths P{c.run_dir};
    std::vector<MatchReport> reports;
    for (const auto& v : volume_plan(c)) {
        if (v.split != Split::Test) continue;
        require(P.match(v.id));
        reports.push_back(read_match_report(P.match(v.id)));
    }
    const auto curve = jaccard_curve(reports, c.backprop_nz, c.backprop_dz, c.ji_bin_slices);
    write_text(P.report_ji(), ji_csv(curve));
    write_text(P.report_svg(), ji_svg({{c.model, curve}}, c.sample_depth()));
    if (fs::exists(P.alpha_csv())) write_text(P.report_alpha(), weight_csv(weight_statistics(read_alpha_csv(P.alpha_csv()))));
    log << "report: " << curve.bins.size() << " depth bins\n";
    for (const auto& b : curve.bins) {
        log << "  " << b.bin_start_um << " um: ";
        if (b.present()) {
            log << "JI " << b.mean_ji << " +- " << b.std_ji << "\n";
        } else {
            log << "no particles\n";
        }
    }
}

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"generate", "simulate", "backprop", "preprocess",
                                                "train",    "infer",    "eval",     "report"};
    return names;
}

inline void run_command(const std::string& cmd, const RunConfig& c, std::ostream& log = std::cerr) {
    fs::create_directories(c.run_dir);
    echo_config(c);
    if (cmd == "generate") return cmd_generate(c, log);
    if (cmd == "simulate") return cmd_simulate(c, log);
    if (cmd == "backprop") return cmd_backprop(c, log);
    if (cmd == "preprocess") return cmd_preprocess(c, log);
    if (cmd == "train") return cmd_train(c, log);
    if (cmd == "infer") return cmd_infer(c, log);
    if (cmd == "eval") return cmd_eval(c, log);
    if (cmd == "report") return cmd_report(c, log);
    if (cmd == "all") {
        for (const auto& name : command_names()) run_command(name, c, log);
        return;
    }
    throw ConfigError("unknown command '" + cmd + "'");
}

/// Process exit status for an exception escaping a command.
inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const MissingInputError*>(&e)) return 3;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    return 1;
}

}  // namespace holodsn::cli
