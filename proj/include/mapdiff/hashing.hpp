#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mapdiff {

/// Incremental SHA-256 returning lowercase hex.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view bytes);
    void update_file(const std::filesystem::path& path);
    [[nodiscard]] std::string hex_digest();

private:
    void* ctx_;
};

[[nodiscard]] std::string sha256_hex(std::string_view bytes);

}  // namespace mapdiff
