#include "mapdiff/checkpoint.hpp"

#include "binary_io.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace mapdiff {

using detail::get;
using detail::put;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out.write("MDCK", 4);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& p : ckpt.params) {
        if (p.name.size() > 0xffff) throw FormatError("parameter name too long");
        put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(p.shape.size()));
        for (int d : p.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    }
    const std::string json = ckpt.config.dump();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(json.size()));
    out.write(json.data(), static_cast<std::streamsize>(json.size()));
    if (!out) throw FormatError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const CheckpointRequirements& required) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    detail::expect_magic(in, "MDCK");
    Checkpoint ckpt;
    const auto count = get<std::uint32_t>(in, "tensor count");
    std::set<std::string> names;
    for (std::uint32_t n = 0; n < count; ++n) {
        const auto len = get<std::uint16_t>(in, "name length");
        std::string name(len, '\0');
        detail::get_bytes(in, name.data(), len, "tensor name");
        if (!names.insert(name).second) throw FormatError("duplicate tensor name '" + name + "'");
        const auto rank = get<std::uint8_t>(in, "rank");
        std::vector<int> shape;
        std::size_t elements = 1;
        for (int r = 0; r < rank; ++r) {
            const auto d = get<std::uint32_t>(in, "dim");
            if (d == 0 || d > (1u << 24)) throw FormatError("implausible tensor dim");
            shape.push_back(static_cast<int>(d));
            elements *= d;
        }
        if (elements > (1u << 26)) throw FormatError("implausible tensor size");
        const auto idx = ckpt.params.add(name, shape);
        auto& values = ckpt.params[idx].value;
        detail::get_bytes(in, reinterpret_cast<char*>(values.data()), values.size() * sizeof(float), "tensor payload");
        for (float v : values)
            if (!std::isfinite(v)) throw FormatError("non-finite parameter in '" + name + "'");
    }
    const auto json_len = get<std::uint32_t>(in, "config length");
    std::string json(json_len, '\0');
    detail::get_bytes(in, json.data(), json_len, "config JSON");
    detail::expect_eof(in);
    try {
        ckpt.config = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint config is not valid JSON: ") + e.what());
    }
    check_compatible(ckpt, required);
    return ckpt;
}

void check_compatible(const Checkpoint& ckpt, const CheckpointRequirements& required) {
    const auto& cfg = ckpt.config;
    try {
        if (required.steps) {
            const int have = cfg.at("schedule").at("T").get<int>();
            if (have != *required.steps)
                throw ConfigError("incompatible checkpoint: trained with T=" + std::to_string(have) +
                                  ", run configured with T=" + std::to_string(*required.steps));
        }
        if (required.anchors) {
            const auto have = cfg.at("anchors").get<std::vector<std::string>>();
            if (have != required.anchors->labels()) throw ConfigError("incompatible checkpoint: anchor set differs");
        }
        if (required.patch_size) {
            const int have = cfg.at("train").at("patch_size").get<int>();
            if (have != *required.patch_size)
                throw ConfigError("incompatible checkpoint: trained with patch size " + std::to_string(have));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("incompatible checkpoint: missing config field (") + e.what() + ")");
    }
}

}  // namespace mapdiff
