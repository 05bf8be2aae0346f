#pragma once

// Little-endian primitive encoding shared by the MDV1/MDM1/MDCK containers.

#include "mapdiff/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace mapdiff::detail {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
        throw FormatError(std::string("truncated file while reading ") + what);
    return value;
}

inline void get_bytes(std::istream& in, char* dst, std::size_t n, const char* what) {
    if (!in.read(dst, static_cast<std::streamsize>(n)))
        throw FormatError(std::string("truncated file while reading ") + what);
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
    char buf[4];
    get_bytes(in, buf, 4, "magic");
    if (std::memcmp(buf, magic, 4) != 0)
        throw FormatError(std::string("bad magic, expected ") + magic);
}

inline void expect_eof(std::istream& in) {
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after payload");
}

}  // namespace mapdiff::detail
