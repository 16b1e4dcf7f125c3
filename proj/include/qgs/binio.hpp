#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace qgs {

// Little-endian primitives for the binary file formats. Read errors report
// the stream offset at which decoding failed.

inline void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    out.write(reinterpret_cast<const char*>(&u), 8);
}

[[noreturn]] inline void read_fail(std::istream& in, const std::string& what) {
    const auto off = in.tellg();
    throw std::runtime_error("truncated or corrupt file while reading " + what + " at offset " +
                             std::to_string(long(off)));
}

inline uint32_t get_u32(std::istream& in, const char* what = "u32") {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) read_fail(in, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
    return v;
}

inline uint64_t get_u64(std::istream& in, const char* what = "u64") {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) read_fail(in, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& in, const char* what = "f64") {
    uint64_t u;
    if (!in.read(reinterpret_cast<char*>(&u), 8)) read_fail(in, what);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

inline void put_str(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), std::streamsize(s.size()));
}

inline std::string get_str(std::istream& in, const char* what = "string") {
    const uint64_t n = get_u64(in, what);
    if (n > (1ull << 30)) read_fail(in, what);
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), std::streamsize(n))) read_fail(in, what);
    return s;
}

}  // namespace qgs
