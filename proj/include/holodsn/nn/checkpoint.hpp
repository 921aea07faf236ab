#pragma once

// Checkpoints are a flat container of named tensors ("HPAR") plus a JSON
// manifest next to it holding the model spec and training metadata.
//
//   "HPAR" | u8 version | u32 count | count × (u32 name_len, name, u32 rank, u32 dims[rank], f64 data[])
//
// Integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "holodsn/core/hvol_io.hpp"
#include "holodsn/nn/model.hpp"

namespace holodsn::nn {

inline constexpr std::array<char, 4> kHparMagic{'H', 'P', 'A', 'R'};
inline constexpr std::uint8_t kHparVersion = 1;

struct CheckpointMeta {
    std::uint64_t iteration = 0;
    std::uint64_t seed = 0;
    double loss = 0.0;
};

inline std::filesystem::path manifest_path(const std::filesystem::path& p) {
    return p.parent_path() / (p.stem().string() + ".json");
}

inline nlohmann::json spec_to_json(const ModelSpec& s) {
    const auto ch = s.vnet.channels();
    return {{"kind", kind_name(s.kind)},
            {"channels", std::vector<std::size_t>(ch.begin(), ch.end())},
            {"gtn", {{"patch", s.gtn.patch}, {"stride", s.gtn.stride}, {"c1", s.gtn.c1}, {"c2", s.gtn.c2}}}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
    try {
        ModelSpec s;
        s.kind = parse_kind(j.at("kind").get<std::string>());
        const auto ch = j.at("channels").get<std::vector<std::size_t>>();
        if (ch.size() != kScales) throw FormatError("checkpoint manifest: channels must list 5 scales");
        s.vnet = VNetConfig::from_channels({ch[0], ch[1], ch[2], ch[3], ch[4]});
        const auto& g = j.at("gtn");
        s.gtn = {g.at("patch").get<std::size_t>(), g.at("stride").get<std::size_t>(), g.at("c1").get<std::size_t>(),
                 g.at("c2").get<std::size_t>(), kExperts};
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }
}

template <typename T>
std::vector<char> encode_hpar(const std::vector<std::pair<std::string, Var<T>>>& named) {
    std::vector<char> out(kHparMagic.begin(), kHparMagic.end());
    out.push_back(static_cast<char>(kHparVersion));
    holodsn::detail::put_u32(out, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, v] : named) {
        holodsn::detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        const auto& t = v.value();
        holodsn::detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape) holodsn::detail::put_u32(out, static_cast<std::uint32_t>(d));
        for (T x : t.data) {
            const auto bits = std::bit_cast<std::uint64_t>(static_cast<double>(x));
            holodsn::detail::put_u32(out, static_cast<std::uint32_t>(bits & 0xFFFFFFFFu));
            holodsn::detail::put_u32(out, static_cast<std::uint32_t>(bits >> 32));
        }
    }
    return out;
}

template <typename T>
std::map<std::string, Tensor<T>> decode_hpar(const std::vector<char>& bytes) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (bytes.size() - pos < n) throw FormatError("HPAR: truncated");
    };
    auto u32 = [&] {
        need(4);
        const auto v = holodsn::detail::get_u32(bytes.data() + pos);
        pos += 4;
        return v;
    };
    need(5);
    if (!std::equal(kHparMagic.begin(), kHparMagic.end(), bytes.begin())) throw FormatError("HPAR: bad magic");
    if (static_cast<std::uint8_t>(bytes[4]) != kHparVersion) throw FormatError("HPAR: unsupported version");
    pos = 5;
    std::map<std::string, Tensor<T>> out;
    const auto count = u32();
    for (std::uint32_t n = 0; n < count; ++n) {
        const auto len = u32();
        need(len);
        std::string name(bytes.data() + pos, len);
        pos += len;
        const auto rank = u32();
        if (rank > 8) throw FormatError("HPAR: implausible rank for " + name);
        Shape s;
        for (std::uint32_t r = 0; r < rank; ++r) s.push_back(u32());
        Tensor<T> t(s);
        need(t.size() * 8);
        for (auto& x : t.data) {
            const std::uint64_t lo = u32(), hi = u32();
            x = static_cast<T>(std::bit_cast<double>(lo | (hi << 32)));
        }
        if (!out.emplace(std::move(name), std::move(t)).second) throw FormatError("HPAR: duplicate tensor name");
    }
    if (pos != bytes.size()) throw FormatError("HPAR: trailing bytes");
    return out;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& m, const CheckpointMeta& meta) {
    write_bytes(path, encode_hpar(m.named_parameters()));
    nlohmann::json j{{"model", spec_to_json(m.spec)},
                     {"iteration", meta.iteration},
                     {"seed", meta.seed},
                     {"loss", meta.loss},
                     {"tensors", path.filename().string()}};
    const auto text = j.dump(2) + "\n";
    write_bytes(manifest_path(path), std::vector<char>(text.begin(), text.end()));
}

/// Loads a checkpoint; every tensor must exist with the shape the model spec implies.
template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta_out = nullptr) {
    const auto mbytes = read_bytes(manifest_path(path));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(mbytes.begin(), mbytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint manifest " + manifest_path(path).string() + ": " + e.what());
    }
    const ModelSpec spec = spec_from_json(j.at("model"));
    auto tensors = decode_hpar<T>(read_bytes(path));
    Model<T> m = init_model<T>(spec, 0);
    const auto named = m.named_parameters();
    if (tensors.size() != named.size()) {
        throw ShapeError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                         std::to_string(named.size()));
    }
    for (auto [name, v] : named) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ShapeError("checkpoint lacks tensor " + name);
        if (it->second.shape != v.shape()) {
            throw ShapeError("checkpoint tensor " + name + " has shape " + shape_str(it->second.shape) +
                             ", expected " + shape_str(v.shape()));
        }
        v.mutable_value() = std::move(it->second);
    }
    if (meta_out) {
        meta_out->iteration = j.value("iteration", std::uint64_t{0});
        meta_out->seed = j.value("seed", std::uint64_t{0});
        meta_out->loss = j.value("loss", 0.0);
    }
    return m;
}

}  // namespace holodsn::nn
