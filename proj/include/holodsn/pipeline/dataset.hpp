#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"
#include "holodsn/core/hvol_io.hpp"
#include "holodsn/pipeline/patches.hpp"

namespace holodsn {

/// Input / hologram / label patches cut from the same lateral window.
struct TrainingPair {
    RealVolume input;     ///< normalized backprop amplitude, patch × patch × nz
    RealVolume hologram;  ///< normalized hologram, patch × patch × 1
    BinaryVolume label;   ///< patch × patch × nz
    std::string volume_id;
    std::string group;  ///< scattering-condition label (e.g. density) for reporting
    PatchWindow window;
};

inline TrainingPair make_training_pair(const RealVolume& input, const RealVolume& hologram,
                                       const BinaryVolume& label, const PatchWindow& w,
                                       std::string volume_id = {}, std::string group = {}) {
    if (input.grid.nx != hologram.grid.nx || input.grid.ny != hologram.grid.ny ||
        input.grid.nx != label.grid.nx || input.grid.ny != label.grid.ny || input.grid.nz != label.grid.nz) {
        throw GeometryError("input, hologram and label volumes disagree in shape");
    }
    return {crop(input, w), crop(hologram, w), crop(label, w), std::move(volume_id), std::move(group), w};
}

inline bool label_is_empty(const BinaryVolume& v) {
    return std::all_of(v.data.begin(), v.data.end(), [](auto b) { return b == 0; });
}

/// One manifest row: full-volume paths plus the crop window.
struct ManifestEntry {
    std::string volume_id;
    std::string group;
    std::filesystem::path input;
    std::filesystem::path hologram;
    std::filesystem::path label;
    PatchWindow window;
};

inline nlohmann::ordered_json manifest_to_json(const std::vector<ManifestEntry>& entries) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["volume_id"] = e.volume_id;
        j["group"] = e.group;
        j["input"] = e.input.generic_string();
        j["hologram"] = e.hologram.generic_string();
        j["label"] = e.label.generic_string();
        j["crop"] = {e.window.x0, e.window.y0};
        j["patch"] = e.window.size;
        arr.push_back(j);
    }
    return arr;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    const auto text = manifest_to_json(entries).dump(2) + "\n";
    write_bytes(path, std::vector<char>(text.begin(), text.end()));
}

/// Relative paths in the manifest resolve against `base` (the run directory).
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path,
                                                const std::filesystem::path& base = {}) {
    const auto raw = read_bytes(path);
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + path.string() + ": " + e.what());
    }
    if (!arr.is_array()) throw FormatError("manifest must be a JSON list");
    auto resolve = [&](const std::string& p) {
        std::filesystem::path q(p);
        return q.is_absolute() || base.empty() ? q : base / q;
    };
    std::vector<ManifestEntry> out;
    for (const auto& j : arr) {
        ManifestEntry e;
        e.volume_id = j.value("volume_id", std::string{});
        e.group = j.value("group", std::string{});
        e.input = resolve(j.at("input").get<std::string>());
        e.hologram = resolve(j.at("hologram").get<std::string>());
        e.label = resolve(j.at("label").get<std::string>());
        const auto c = j.at("crop").get<std::vector<std::size_t>>();
        if (c.size() != 2) throw FormatError("manifest crop must be [x0, y0]");
        e.window = {c[0], c[1], j.at("patch").get<std::size_t>()};
        out.push_back(std::move(e));
    }
    return out;
}

/// Materializes manifest rows into patches; each full volume is read once.
inline std::vector<TrainingPair> load_pairs(const std::vector<ManifestEntry>& entries) {
    std::map<std::string, RealVolume> reals;
    std::map<std::string, BinaryVolume> labels;
    auto real = [&](const std::filesystem::path& p) -> const RealVolume& {
        auto it = reals.find(p.string());
        if (it == reals.end()) it = reals.emplace(p.string(), read_hvol<double>(p)).first;
        return it->second;
    };
    auto label = [&](const std::filesystem::path& p) -> const BinaryVolume& {
        auto it = labels.find(p.string());
        if (it == labels.end()) it = labels.emplace(p.string(), read_hvol<std::uint8_t>(p)).first;
        return it->second;
    };
    std::vector<TrainingPair> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back(make_training_pair(real(e.input), real(e.hologram), label(e.label), e.window, e.volume_id,
                                         e.group));
    }
    return out;
}

}  // namespace holodsn
