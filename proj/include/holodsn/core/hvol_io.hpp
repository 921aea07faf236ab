#pragma once

// HVOL binary volume container.
//
//   bytes 0..3   magic "HVOL"
//   byte  4      version (1)
//   byte  5      dtype: 1 = f32 real, 2 = f32 complex interleaved (re, im), 3 = u8 binary
//   bytes 6..17  u32 nx, ny, nz, little-endian
//   payload      nx*ny*nz samples, x fastest, little-endian IEEE-754
//
// Pitches and acquisition metadata live in a JSON sidecar "<stem>.meta.json".

#include <array>
#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"

namespace holodsn {

enum class DType : std::uint8_t { F32Real = 1, F32Complex = 2, U8Binary = 3 };

inline constexpr std::array<char, 4> kHvolMagic{'H', 'V', 'O', 'L'};
inline constexpr std::uint8_t kHvolVersion = 1;
inline constexpr std::size_t kHvolHeaderBytes = 18;

struct Sidecar {
    std::optional<double> wavelength;  ///< vacuum wavelength, µm
    std::optional<double> n_medium;
    nlohmann::json provenance = nlohmann::json::object();
};

template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};

template <typename T>
constexpr DType dtype_of() {
    if constexpr (std::is_same_v<T, std::uint8_t>) {
        return DType::U8Binary;
    } else if constexpr (is_complex<T>::value) {
        return DType::F32Complex;
    } else {
        static_assert(std::is_floating_point_v<T>, "unsupported HVOL sample type");
        return DType::F32Real;
    }
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) {
    return p.parent_path() / (p.stem().string() + ".meta.json");
}

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

inline std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
    }
    return v;
}

inline void put_f32(std::vector<char>& out, double v) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline float get_f32(const char* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::size_t sample_bytes(DType t) {
    switch (t) {
        case DType::F32Real: return 4;
        case DType::F32Complex: return 8;
        case DType::U8Binary: return 1;
    }
    throw FormatError("unknown HVOL dtype");
}

}  // namespace detail

/// Encodes a volume into HVOL bytes. Real and complex samples are narrowed to f32.
template <typename T>
std::vector<char> encode_hvol(const Volume<T>& vol) {
    constexpr DType dt = dtype_of<T>();
    std::vector<char> out;
    out.reserve(kHvolHeaderBytes + vol.size() * detail::sample_bytes(dt));
    out.insert(out.end(), kHvolMagic.begin(), kHvolMagic.end());
    out.push_back(static_cast<char>(kHvolVersion));
    out.push_back(static_cast<char>(dt));
    detail::put_u32(out, static_cast<std::uint32_t>(vol.grid.nx));
    detail::put_u32(out, static_cast<std::uint32_t>(vol.grid.ny));
    detail::put_u32(out, static_cast<std::uint32_t>(vol.grid.nz));
    for (const auto& v : vol.data) {
        if constexpr (dt == DType::U8Binary) {
            out.push_back(static_cast<char>(v));
        } else if constexpr (dt == DType::F32Complex) {
            detail::put_f32(out, v.real());
            detail::put_f32(out, v.imag());
        } else {
            detail::put_f32(out, v);
        }
    }
    return out;
}

/// Decodes HVOL bytes. Pitches default to 1 µm; callers overwrite them from the sidecar.
template <typename T>
Volume<T> decode_hvol(const std::vector<char>& bytes) {
    constexpr DType want = dtype_of<T>();
    if (bytes.size() < kHvolHeaderBytes) throw FormatError("HVOL: truncated header");
    if (!std::equal(kHvolMagic.begin(), kHvolMagic.end(), bytes.begin())) {
        throw FormatError("HVOL: bad magic");
    }
    if (static_cast<std::uint8_t>(bytes[4]) != kHvolVersion) {
        throw FormatError("HVOL: unsupported version " +
                          std::to_string(static_cast<int>(static_cast<std::uint8_t>(bytes[4]))));
    }
    const auto dt = static_cast<DType>(static_cast<std::uint8_t>(bytes[5]));
    if (dt != DType::F32Real && dt != DType::F32Complex && dt != DType::U8Binary) {
        throw FormatError("HVOL: unknown dtype code");
    }
    if (dt != want) throw FormatError("HVOL: dtype mismatch");
    GridSpec g;
    g.nx = detail::get_u32(bytes.data() + 6);
    g.ny = detail::get_u32(bytes.data() + 10);
    g.nz = detail::get_u32(bytes.data() + 14);
    if (g.nx == 0 || g.ny == 0 || g.nz == 0) throw FormatError("HVOL: zero dimension");
    const std::size_t n = g.size();
    if (bytes.size() != kHvolHeaderBytes + n * detail::sample_bytes(dt)) {
        throw FormatError("HVOL: payload length does not match dimensions");
    }
    std::vector<T> data(n);
    const char* p = bytes.data() + kHvolHeaderBytes;
    for (std::size_t i = 0; i < n; ++i) {
        if constexpr (want == DType::U8Binary) {
            const auto b = static_cast<std::uint8_t>(p[i]);
            if (b > 1) throw FormatError("HVOL: binary volume holds a value other than 0/1");
            data[i] = b;
        } else if constexpr (want == DType::F32Complex) {
            using R = typename T::value_type;
            data[i] = T(static_cast<R>(detail::get_f32(p + 8 * i)),
                        static_cast<R>(detail::get_f32(p + 8 * i + 4)));
        } else {
            data[i] = static_cast<T>(detail::get_f32(p + 4 * i));
        }
    }
    return Volume<T>(g, std::move(data));
}

inline nlohmann::json sidecar_json(const GridSpec& g, DType dt, const Sidecar& meta) {
    nlohmann::json j;
    j["format"] = "HVOL";
    j["version"] = kHvolVersion;
    j["dtype"] = static_cast<int>(dt);
    j["dims"] = {g.nx, g.ny, g.nz};
    j["pitch_um"] = {g.dx, g.dy, g.dz};
    if (meta.wavelength) j["wavelength_um"] = *meta.wavelength;
    if (meta.n_medium) j["n_medium"] = *meta.n_medium;
    j["provenance"] = meta.provenance;
    return j;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open for writing: " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("write failed: " + path.string());
}

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("missing input: " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

template <typename T>
void write_hvol(const std::filesystem::path& path, const Volume<T>& vol, const Sidecar& meta = {}) {
    write_bytes(path, encode_hvol(vol));
    const auto text = sidecar_json(vol.grid, dtype_of<T>(), meta).dump(2) + "\n";
    write_bytes(sidecar_path(path), std::vector<char>(text.begin(), text.end()));
}

/// Reads an HVOL file and, when present, its sidecar (pitches, optics, provenance).
template <typename T>
Volume<T> read_hvol(const std::filesystem::path& path, Sidecar* meta_out = nullptr) {
    auto vol = decode_hvol<T>(read_bytes(path));
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        const auto raw = read_bytes(side);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(raw.begin(), raw.end());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("HVOL sidecar: " + std::string(e.what()));
        }
        const auto dims = j.at("dims").get<std::vector<std::size_t>>();
        if (dims.size() != 3 || dims[0] != vol.grid.nx || dims[1] != vol.grid.ny ||
            dims[2] != vol.grid.nz) {
            throw FormatError("HVOL sidecar dims disagree with payload: " + side.string());
        }
        const auto pitch = j.at("pitch_um").get<std::vector<double>>();
        if (pitch.size() != 3) throw FormatError("HVOL sidecar: pitch_um must have 3 entries");
        vol.grid.dx = pitch[0];
        vol.grid.dy = pitch[1];
        vol.grid.dz = pitch[2];
        vol.grid.validate();
        if (meta_out) {
            meta_out->wavelength.reset();
            meta_out->n_medium.reset();
            if (j.contains("wavelength_um")) meta_out->wavelength = j["wavelength_um"].get<double>();
            if (j.contains("n_medium")) meta_out->n_medium = j["n_medium"].get<double>();
            meta_out->provenance = j.value("provenance", nlohmann::json::object());
        }
    }
    return vol;
}

inline void write_hologram(const std::filesystem::path& path, const Hologram& h,
                           nlohmann::json provenance = nlohmann::json::object()) {
    write_hvol(path, h.intensity, Sidecar{h.wavelength, h.n_medium, std::move(provenance)});
}

inline Hologram read_hologram(const std::filesystem::path& path, Sidecar* meta_out = nullptr) {
    Sidecar meta;
    Hologram h;
    h.intensity = read_hvol<double>(path, &meta);
    if (h.intensity.grid.nz != 1) throw FormatError("hologram must have nz = 1: " + path.string());
    if (meta.wavelength) h.wavelength = *meta.wavelength;
    if (meta.n_medium) h.n_medium = *meta.n_medium;
    if (meta_out) *meta_out = meta;
    return h;
}

}  // namespace holodsn
