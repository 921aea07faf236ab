#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/hvol_io.hpp"

namespace holodsn::cli {

/// Every knob of the pipeline. Defaults are the desk-scale preset; `scale = full`
/// swaps in the full-size geometry before file and flag values are applied.
struct RunConfig {
    std::string run_dir = "run";
    std::uint64_t seed = 7;
    std::size_t threads = 1;
    std::string scale = "desk";

    // particle fields
    std::vector<double> density{6.41e3};  ///< particles / µL; volume v uses density[v % n]
    double diameter = 1.0;
    double dn = 0.26;
    double min_dist = 2.0;
    std::size_t volumes_train = 40;
    std::size_t volumes_val = 2;
    std::size_t volumes_test = 12;

    // optics and simulation grid
    std::size_t nx = 256;
    std::size_t ny = 256;
    double lateral_pitch = 0.1725;
    double axial_pitch = 0.0;  ///< 0: λ_m / 4
    double wavelength = 0.6328;
    double n_medium = 1.33;
    double band_limit = 1.0;
    std::string noise = "none";
    double noise_level = 0.0;

    // backpropagation; the sample depth is backprop_nz · backprop_dz
    std::size_t backprop_nz = 32;
    double backprop_dz = 5.0;
    bool subtract_dc = false;

    // patches
    std::size_t patch = 64;
    std::size_t overlap = 32;
    std::size_t eval_overlap = 48;
    std::string infer_tiling = "periodic";
    bool keep_empty = false;

    // network and training
    std::string model = "expert";
    std::string init = "xavier";
    std::vector<std::string> expert_checkpoints;
    std::string precision = "float";
    double lr = 2e-3;
    std::size_t batch = 4;
    double gamma = 0.0;
    std::size_t iterations = 2000;
    std::size_t val_every = 100;

    // evaluation
    std::string otsu_range = "unit";
    std::size_t min_cluster = 10;
    double gate_a = 2.0;
    double gate_b = 2.0;
    double gate_c = 6.0;
    std::size_t ji_bin_slices = 10;

    [[nodiscard]] std::size_t volume_count() const { return volumes_train + volumes_val + volumes_test; }
    [[nodiscard]] double sample_depth() const { return static_cast<double>(backprop_nz) * backprop_dz; }
    [[nodiscard]] double bpm_pitch() const { return axial_pitch > 0.0 ? axial_pitch : wavelength / n_medium / 4.0; }

    void apply_scale_preset() {
        if (scale == "desk") {
            RunConfig d;
            nx = d.nx, ny = d.ny, backprop_nz = d.backprop_nz, patch = d.patch, overlap = d.overlap;
            eval_overlap = d.eval_overlap, infer_tiling = d.infer_tiling, otsu_range = d.otsu_range;
            keep_empty = d.keep_empty;
            volumes_train = d.volumes_train, volumes_val = d.volumes_val, volumes_test = d.volumes_test;
            density = d.density, lr = d.lr, batch = d.batch, iterations = d.iterations;
        } else if (scale == "full") {
            nx = ny = 1024;
            backprop_nz = 100;
            patch = 128;
            overlap = 64;
            eval_overlap = 0;
            infer_tiling = "clip";
            otsu_range = "slice";
            volumes_train = 48, volumes_val = 2, volumes_test = 10;
            density = {1.6e4, 3.2e4, 6.41e4, 12.82e4};
            lr = 1e-4, batch = 4, iterations = 100000;
            keep_empty = true;
        } else {
            throw ConfigError("key 'scale': expected desk or full, got '" + scale + "'");
        }
    }

    void validate() const;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end || !std::isfinite(out)) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

template <typename U>
U to_unsigned(const std::string& key, const std::string& v) {
    U out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

}  // namespace detail

struct KeyInfo {
    std::string name;
    std::string doc;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

/// Registry of all config keys in documentation order.
inline const std::vector<KeyInfo>& config_keys() {
    using C = RunConfig;
    static const std::vector<KeyInfo> keys = [] {
        std::vector<KeyInfo> k;
        auto str = [&](std::string n, std::string doc, std::string C::*m) {
            k.push_back({n, std::move(doc), [m](C& c, const std::string& v) { c.*m = v; },
                         [m](const C& c) { return c.*m; }});
        };
        auto num = [&](std::string n, std::string doc, double C::*m) {
            k.push_back({n, std::move(doc), [m, n](C& c, const std::string& v) { c.*m = detail::to_double(n, v); },
                         [m](const C& c) { return detail::fmt(c.*m); }});
        };
        auto cnt = [&](std::string n, std::string doc, std::size_t C::*m) {
            k.push_back({n, std::move(doc),
                         [m, n](C& c, const std::string& v) { c.*m = detail::to_unsigned<std::size_t>(n, v); },
                         [m](const C& c) { return std::to_string(c.*m); }});
        };
        auto flag = [&](std::string n, std::string doc, bool C::*m) {
            k.push_back({n, std::move(doc), [m, n](C& c, const std::string& v) { c.*m = detail::to_bool(n, v); },
                         [m](const C& c) { return std::string(c.*m ? "true" : "false"); }});
        };
        str("run_dir", "directory holding all artifacts of a run", &C::run_dir);
        k.push_back({"seed", "master seed; per-volume and training seeds derive from it",
                     [](C& c, const std::string& v) { c.seed = detail::to_unsigned<std::uint64_t>("seed", v); },
                     [](const C& c) { return std::to_string(c.seed); }});
        cnt("threads", "worker threads for per-volume stages (default from HOLODSN_THREADS, else 1)", &C::threads);
        str("scale", "desk or full; sets grid, patch, dataset and schedule defaults", &C::scale);
        k.push_back({"density", "particle density per µL, comma-separated list cycled over volumes",
                     [](C& c, const std::string& v) {
                         c.density.clear();
                         for (const auto& s : detail::split_list(v)) c.density.push_back(detail::to_double("density", s));
                     },
                     [](const C& c) {
                         std::string s;
                         for (double d : c.density) s += (s.empty() ? "" : ",") + detail::fmt(d);
                         return s;
                     }});
        num("diameter", "particle diameter, µm", &C::diameter);
        num("dn", "particle refractive-index contrast", &C::dn);
        num("min_dist", "minimum center distance, µm", &C::min_dist);
        cnt("volumes_train", "volumes used for training patches", &C::volumes_train);
        cnt("volumes_val", "volumes used for validation patches", &C::volumes_val);
        cnt("volumes_test", "held-out volumes for inference and scoring", &C::volumes_test);
        cnt("nx", "lateral grid size along x", &C::nx);
        cnt("ny", "lateral grid size along y", &C::ny);
        num("lateral_pitch", "lateral pixel pitch, µm", &C::lateral_pitch);
        num("axial_pitch", "simulation slice thickness, µm (0: a quarter medium wavelength)", &C::axial_pitch);
        num("wavelength", "vacuum wavelength, µm", &C::wavelength);
        num("n_medium", "medium refractive index", &C::n_medium);
        num("band_limit", "fraction of the medium wavenumber kept by the propagator", &C::band_limit);
        str("noise", "sensor noise: none, poisson or gaussian", &C::noise);
        num("noise_level", "photons per unit intensity (poisson) or intensity std (gaussian)", &C::noise_level);
        cnt("backprop_nz", "backpropagated slices; also sets the sample depth", &C::backprop_nz);
        num("backprop_dz", "backpropagation slice spacing, µm", &C::backprop_dz);
        flag("subtract_dc", "backpropagate I - mean(I) instead of I", &C::subtract_dc);
        cnt("patch", "lateral patch size in voxels", &C::patch);
        cnt("overlap", "lateral overlap of training patches", &C::overlap);
        cnt("eval_overlap", "lateral overlap of inference patches (validation tiles without overlap)", &C::eval_overlap);
        str("infer_tiling", "clip (in-bounds windows, plain average) or periodic (wrapped windows, tent blend)",
            &C::infer_tiling);
        flag("keep_empty", "keep training patches whose label is empty", &C::keep_empty);
        str("model", "expert, generalist, generalist3x or dsn", &C::model);
        str("init", "xavier, or pretrained (dsn only; needs expert_checkpoints)", &C::init);
        k.push_back({"expert_checkpoints", "three expert checkpoint paths, comma-separated",
                     [](C& c, const std::string& v) { c.expert_checkpoints = detail::split_list(v); },
                     [](const C& c) {
                         std::string s;
                         for (const auto& p : c.expert_checkpoints) s += (s.empty() ? "" : ",") + p;
                         return s;
                     }});
        str("precision", "training and inference arithmetic: float or double", &C::precision);
        num("lr", "Adam learning rate", &C::lr);
        cnt("batch", "samples per optimizer step", &C::batch);
        num("gamma", "L2 coefficient on the squared parameter norm", &C::gamma);
        cnt("iterations", "optimizer steps", &C::iterations);
        cnt("val_every", "validate every this many steps (0: only at the end)", &C::val_every);
        str("otsu_range", "histogram range for thresholding: slice (min-max) or unit ([0,1])", &C::otsu_range);
        cnt("min_cluster", "clusters with fewer voxels are discarded", &C::min_cluster);
        num("gate_a", "gate semi-axis along x, µm", &C::gate_a);
        num("gate_b", "gate semi-axis along y, µm", &C::gate_b);
        num("gate_c", "gate semi-axis along z, µm", &C::gate_c);
        cnt("ji_bin_slices", "backpropagated slices per depth bin", &C::ji_bin_slices);
        return k;
    }();
    return keys;
}

inline const KeyInfo& find_key(const std::string& name) {
    for (const auto& k : config_keys()) {
        if (k.name == name) return k;
    }
    throw ConfigError("unknown config key '" + name + "'");
}

inline void RunConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(scale == "desk" || scale == "full", "key 'scale': expected desk or full");
    need(!density.empty(), "key 'density': at least one value required");
    for (double d : density) need(d >= 0.0, "key 'density': values must be >= 0");
    need(diameter > 0.0, "key 'diameter': must be > 0");
    need(min_dist >= 0.0, "key 'min_dist': must be >= 0");
    need(nx > 0 && ny > 0, "keys 'nx'/'ny': must be > 0");
    need(lateral_pitch > 0.0, "key 'lateral_pitch': must be > 0");
    need(axial_pitch >= 0.0, "key 'axial_pitch': must be >= 0");
    need(wavelength > 0.0, "key 'wavelength': must be > 0");
    need(n_medium >= 1.0, "key 'n_medium': must be >= 1");
    need(band_limit > 0.0 && band_limit <= 1.0, "key 'band_limit': must be in (0, 1]");
    need(noise == "none" || noise == "poisson" || noise == "gaussian", "key 'noise': expected none, poisson or gaussian");
    need(backprop_nz > 0 && backprop_dz > 0.0, "keys 'backprop_nz'/'backprop_dz': must be > 0");
    need(patch > 0 && patch <= nx && patch <= ny, "key 'patch': must fit the lateral grid");
    need(overlap < patch && eval_overlap < patch, "keys 'overlap'/'eval_overlap': must be smaller than the patch");
    need(infer_tiling == "clip" || infer_tiling == "periodic", "key 'infer_tiling': expected clip or periodic");
    need(infer_tiling == "clip" || (nx % (patch - eval_overlap) == 0 && ny % (patch - eval_overlap) == 0),
         "key 'infer_tiling': periodic needs nx and ny divisible by patch - eval_overlap");
    need(model == "expert" || model == "generalist" || model == "generalist3x" || model == "dsn",
         "key 'model': expected expert, generalist, generalist3x or dsn");
    need(init == "xavier" || init == "pretrained", "key 'init': expected xavier or pretrained");
    need(init == "xavier" || (model == "dsn" && expert_checkpoints.size() == 3),
         "key 'init': pretrained needs model = dsn and three expert_checkpoints");
    need(precision == "float" || precision == "double", "key 'precision': expected float or double");
    need(lr > 0.0, "key 'lr': must be > 0");
    need(batch > 0, "key 'batch': must be > 0");
    need(gamma >= 0.0, "key 'gamma': must be >= 0");
    need(otsu_range == "slice" || otsu_range == "unit", "key 'otsu_range': expected slice or unit");
    need(gate_a > 0.0 && gate_b > 0.0 && gate_c > 0.0, "gate semi-axes must be > 0");
    need(ji_bin_slices > 0, "key 'ji_bin_slices': must be > 0");
}

/// key=value lines; '#' starts a comment. Returns pairs in file order.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                          const std::string& origin = "config") {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return out;
}

/// Thread count when neither file nor flags give one.
inline std::size_t default_threads() {
    if (const char* env = std::getenv("HOLODSN_THREADS")) {
        try {
            const auto n = detail::to_unsigned<std::size_t>("HOLODSN_THREADS", env);
            if (n > 0) return n;
        } catch (const ConfigError&) {
        }
    }
    return 1;
}

/// Defaults < file < flags. The scale preset is applied first, from whichever
/// layer sets it last.
inline RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file,
                                const std::vector<std::pair<std::string, std::string>>& flags) {
    RunConfig c;
    c.threads = default_threads();
    for (const auto& [k, v] : file) find_key(k);
    for (const auto& [k, v] : flags) find_key(k);
    std::string scale = c.scale;
    for (const auto* layer : {&file, &flags}) {
        for (const auto& [k, v] : *layer) {
            if (k == "scale") scale = v;
        }
    }
    c.scale = scale;
    c.apply_scale_preset();
    for (const auto* layer : {&file, &flags}) {
        for (const auto& [k, v] : *layer) find_key(k).set(c, v);
    }
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::string>>& flags = {}) {
    std::vector<std::pair<std::string, std::string>> file;
    if (!path.empty()) {
        if (!std::filesystem::exists(path)) throw MissingInputError("missing input: " + path.string());
        const auto raw = read_bytes(path);
        file = parse_config_text(std::string(raw.begin(), raw.end()), path.string());
    }
    return resolve_config(file, flags);
}

/// Fully resolved config, one documented key per line; parses back to the same values.
inline std::string config_text(const RunConfig& c) {
    std::string s;
    for (const auto& k : config_keys()) s += "# " + k.doc + "\n" + k.name + " = " + k.get(c) + "\n";
    return s;
}

}  // namespace holodsn::cli
