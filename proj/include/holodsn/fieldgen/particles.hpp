#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"
#include "holodsn/core/hvol_io.hpp"
#include "holodsn/core/rng.hpp"

namespace holodsn {

/// Spherical scatterer; position and diameter in µm.
struct Particle {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double diameter = 1.0;
    double index_contrast = 0.26;

    [[nodiscard]] double radius() const noexcept { return 0.5 * diameter; }
    friend bool operator==(const Particle&, const Particle&) = default;
};

struct ParticleField {
    std::vector<Particle> particles;
    Vec3 dims{0.0, 0.0, 0.0};  ///< physical volume, µm
    double density = 0.0;      ///< particles per µL
    double min_dist = 0.0;     ///< µm
    std::uint64_t seed = 0;
};

struct SamplingParams {
    double density = 1.6e4;  ///< particles per µL
    Vec3 dims{176.64, 176.64, 500.0};
    double min_dist = 2.0;
    double diameter = 1.0;
    double index_contrast = 0.26;
    std::uint64_t seed = 0;
    /// Dart-throwing budget per requested particle before giving up.
    std::size_t attempts_per_particle = 20000;
};

/// round(ρ · V) with V converted from µm³ to µL.
inline std::size_t expected_count(double density_per_ul, const Vec3& dims) {
    const double vol_ul = dims[0] * dims[1] * dims[2] * 1e-9;
    return static_cast<std::size_t>(std::llround(density_per_ul * vol_ul));
}

/// Poisson-disk dart throwing: candidates are drawn uniformly inside the volume
/// (sphere fully contained) and rejected when closer than min_dist to an accepted
/// point. A background grid of cell size min_dist/√3 holds at most one point per cell.
inline ParticleField sample_particles(const SamplingParams& p) {
    if (!(p.diameter > 0.0)) throw PackingError("particle diameter must be > 0");
    if (p.density < 0.0) throw PackingError("density must be >= 0");
    const double r = 0.5 * p.diameter;
    for (double d : p.dims) {
        if (!(d > p.diameter)) throw PackingError("volume too small for one particle");
    }
    ParticleField field;
    field.dims = p.dims;
    field.density = p.density;
    field.min_dist = p.min_dist;
    field.seed = p.seed;
    const std::size_t target = expected_count(p.density, p.dims);
    field.particles.reserve(target);

    Rng rng(p.seed);
    const bool check = p.min_dist > 0.0;
    const double cell = check ? p.min_dist / std::sqrt(3.0) : 1.0;
    std::array<long, 3> ncell{};
    for (int a = 0; a < 3; ++a) {
        ncell[a] = std::max<long>(1, static_cast<long>(std::ceil(p.dims[a] / cell)));
    }
    std::unordered_map<long long, std::size_t> occupied;
    auto key = [&](long cx, long cy, long cz) {
        return (static_cast<long long>(cz) * ncell[1] + cy) * ncell[0] + cx;
    };
    const double min2 = p.min_dist * p.min_dist;
    const std::size_t budget = std::max<std::size_t>(1000, target * p.attempts_per_particle);
    std::size_t attempts = 0;

    while (field.particles.size() < target) {
        if (++attempts > budget) {
            throw PackingError("infeasible packing: placed " + std::to_string(field.particles.size()) +
                               " of " + std::to_string(target) + " particles");
        }
        const Particle cand{rng.uniform(r, p.dims[0] - r), rng.uniform(r, p.dims[1] - r),
                            rng.uniform(r, p.dims[2] - r), p.diameter, p.index_contrast};
        if (!check) {
            field.particles.push_back(cand);
            continue;
        }
        const long cx = std::min(ncell[0] - 1, static_cast<long>(cand.x / cell));
        const long cy = std::min(ncell[1] - 1, static_cast<long>(cand.y / cell));
        const long cz = std::min(ncell[2] - 1, static_cast<long>(cand.z / cell));
        bool ok = true;
        for (long dz = -2; dz <= 2 && ok; ++dz) {
            for (long dy = -2; dy <= 2 && ok; ++dy) {
                for (long dx = -2; dx <= 2 && ok; ++dx) {
                    const long qx = cx + dx, qy = cy + dy, qz = cz + dz;
                    if (qx < 0 || qy < 0 || qz < 0 || qx >= ncell[0] || qy >= ncell[1] ||
                        qz >= ncell[2]) {
                        continue;
                    }
                    auto it = occupied.find(key(qx, qy, qz));
                    if (it == occupied.end()) continue;
                    const auto& o = field.particles[it->second];
                    const double d2 = (o.x - cand.x) * (o.x - cand.x) + (o.y - cand.y) * (o.y - cand.y) +
                                      (o.z - cand.z) * (o.z - cand.z);
                    if (d2 < min2) ok = false;
                }
            }
        }
        if (!ok) continue;
        occupied.emplace(key(cx, cy, cz), field.particles.size());
        field.particles.push_back(cand);
    }
    return field;
}

inline std::filesystem::path field_sidecar_path(const std::filesystem::path& p) {
    return sidecar_path(p);
}

/// JSON lines: one {"x","y","z","D","dn"} object per particle; sidecar records seed, ρ, min_dist.
inline void write_field_jsonl(const std::filesystem::path& path, const ParticleField& field) {
    std::string text;
    for (const auto& q : field.particles) {
        nlohmann::ordered_json j;
        j["x"] = q.x;
        j["y"] = q.y;
        j["z"] = q.z;
        j["D"] = q.diameter;
        j["dn"] = q.index_contrast;
        text += j.dump();
        text += '\n';
    }
    write_bytes(path, std::vector<char>(text.begin(), text.end()));
    nlohmann::ordered_json meta;
    meta["seed"] = field.seed;
    meta["density_per_ul"] = field.density;
    meta["min_dist_um"] = field.min_dist;
    meta["dims_um"] = {field.dims[0], field.dims[1], field.dims[2]};
    meta["count"] = field.particles.size();
    const auto mt = meta.dump(2) + "\n";
    write_bytes(field_sidecar_path(path), std::vector<char>(mt.begin(), mt.end()));
}

/// Reads a particle JSON-lines file. Lines may omit D / dn; they then take
/// `default_diameter` / `default_dn`.
inline ParticleField read_field_jsonl(const std::filesystem::path& path, double default_diameter = 1.0,
                                      double default_dn = 0.26) {
    const auto raw = read_bytes(path);
    ParticleField field;
    const auto side = field_sidecar_path(path);
    if (std::filesystem::exists(side)) {
        const auto mraw = read_bytes(side);
        const auto meta = nlohmann::json::parse(mraw.begin(), mraw.end());
        field.seed = meta.value("seed", std::uint64_t{0});
        field.density = meta.value("density_per_ul", 0.0);
        field.min_dist = meta.value("min_dist_um", 0.0);
        if (meta.contains("dims_um")) {
            const auto d = meta["dims_um"].get<std::vector<double>>();
            if (d.size() == 3) field.dims = {d[0], d[1], d[2]};
        }
    }
    std::istringstream is(std::string(raw.begin(), raw.end()));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Particle q;
            q.x = j.at("x").get<double>();
            q.y = j.at("y").get<double>();
            q.z = j.at("z").get<double>();
            q.diameter = j.value("D", default_diameter);
            q.index_contrast = j.value("dn", default_dn);
            if (!(q.diameter > 0.0)) throw FormatError("particle diameter must be > 0");
            field.particles.push_back(q);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return field;
}

}  // namespace holodsn
