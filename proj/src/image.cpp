#include "qgs/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "qgs/vec.hpp"

namespace qgs {

namespace {

uint8_t to_byte(double v) { return uint8_t(std::lround(clamp01(v) * 255.0)); }

void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

}  // namespace

void write_ppm(const Image& img, const std::string& path) {
    std::string bytes;
    char header[64];
    const int n = std::snprintf(header, sizeof header, "P6\n%d %d\n255\n", img.width, img.height);
    bytes.append(header, size_t(n));
    bytes.reserve(bytes.size() + img.count());
    for (double v : img.px) bytes.push_back(char(to_byte(v)));
    write_file_atomic(path, bytes);
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("unsupported PPM: " + path);
    in.get();  // single whitespace after maxval
    Image img(w, h);
    std::vector<unsigned char> raw(img.count());
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (!in) throw std::runtime_error("truncated PPM: " + path);
    for (size_t i = 0; i < raw.size(); ++i) img.px[i] = raw[i] / 255.0;
    return img;
}

namespace {

void put_u32(std::string& s, uint32_t v) {
    s.push_back(char((v >> 24) & 0xff));
    s.push_back(char((v >> 16) & 0xff));
    s.push_back(char((v >> 8) & 0xff));
    s.push_back(char(v & 0xff));
}

void png_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32(out, uint32_t(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    const uLong crc = crc32(0, reinterpret_cast<const Bytef*>(body.data()), uInt(body.size()));
    put_u32(out, uint32_t(crc));
}

}  // namespace

void write_png(const Image& img, const std::string& path) {
    std::string out("\x89PNG\r\n\x1a\n", 8);

    std::string ihdr;
    put_u32(ihdr, uint32_t(img.width));
    put_u32(ihdr, uint32_t(img.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // RGB
    ihdr.push_back(0);   // deflate
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    png_chunk(out, "IHDR", ihdr);

    // raw scanlines, filter byte 0 per row
    std::string raw;
    raw.reserve(size_t(img.height) * (1 + size_t(img.width) * 3));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        for (int x = 0; x < img.width; ++x) {
            const double* p = img.at(x, y);
            raw.push_back(char(to_byte(p[0])));
            raw.push_back(char(to_byte(p[1])));
            raw.push_back(char(to_byte(p[2])));
        }
    }
    uLongf zlen = compressBound(uLong(raw.size()));
    std::string z(zlen, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen,
                  reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png deflate failed");
    z.resize(zlen);
    png_chunk(out, "IDAT", z);
    png_chunk(out, "IEND", "");
    write_file_atomic(path, out);
}

}  // namespace qgs
