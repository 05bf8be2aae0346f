#include "mapdiff/volume_io.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mapdiff {

using detail::get;
using detail::put;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

Dims read_dims(std::istream& in) {
    const auto h = get<std::uint32_t>(in, "H");
    const auto w = get<std::uint32_t>(in, "W");
    const auto d = get<std::uint32_t>(in, "D");
    constexpr std::uint32_t kMaxExtent = 1u << 14;
    if (h == 0 || w == 0 || d == 0 || h > kMaxExtent || w > kMaxExtent || d > kMaxExtent)
        throw FormatError("implausible dims in header");
    return Dims{static_cast<int>(h), static_cast<int>(w), static_cast<int>(d)};
}

void write_dims(std::ostream& out, const Dims& dims) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.h));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.w));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.d));
}

}  // namespace

void write_volume(const Volume& v, const std::filesystem::path& path) {
    auto out = open_out(path);
    out.write("MDV1", 4);
    write_dims(out, v.dims());
    for (float s : v.spacing()) put<float>(out, s);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(v.dose()));
    const auto data = v.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw FormatError("write failed for " + path.string());
}

Volume read_volume(const std::filesystem::path& path) {
    auto in = open_in(path);
    detail::expect_magic(in, "MDV1");
    const Dims dims = read_dims(in);
    std::array<float, 3> spacing{};
    for (float& s : spacing) s = get<float>(in, "spacing");
    const auto code = get<std::uint8_t>(in, "dose code");
    const auto dose = dose_from_code(code);
    if (!dose) throw FormatError("unknown dose code " + std::to_string(code));

    std::vector<float> data(dims.count());
    detail::get_bytes(in, reinterpret_cast<char*>(data.data()), data.size() * sizeof(float),
                      "intensity payload");
    detail::expect_eof(in);
    for (float x : data)
        if (!std::isfinite(x)) throw FormatError("non-finite intensity in " + path.string());
    return Volume(dims, std::move(data), spacing, *dose);
}

void write_mask(const BodyMask& m, const std::filesystem::path& path) {
    auto out = open_out(path);
    out.write("MDM1", 4);
    write_dims(out, m.dims());
    const auto flags = m.flags();
    out.write(reinterpret_cast<const char*>(flags.data()), static_cast<std::streamsize>(flags.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

BodyMask read_mask(const std::filesystem::path& path) {
    auto in = open_in(path);
    detail::expect_magic(in, "MDM1");
    const Dims dims = read_dims(in);
    std::vector<std::uint8_t> flags(dims.count());
    detail::get_bytes(in, reinterpret_cast<char*>(flags.data()), flags.size(), "mask payload");
    detail::expect_eof(in);
    for (auto f : flags)
        if (f > 1) throw FormatError("mask byte outside {0,1}");
    if (std::find(flags.begin(), flags.end(), std::uint8_t{1}) == flags.end())
        throw FormatError("empty mask in " + path.string());
    return BodyMask(dims, std::move(flags));
}

}  // namespace mapdiff
