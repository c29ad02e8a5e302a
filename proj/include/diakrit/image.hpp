#pragma once

// 8-bit RGB raster with PNG and PPM (P6) codecs. The PNG writer emits a
// single IDAT with filter 0 rows; the reader accepts 8-bit gray/RGB/RGBA,
// all five row filters, and verifies chunk CRCs. Interlaced files are
// rejected.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "diakrit/error.hpp"
#include "diakrit/io.hpp"

namespace diakrit {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {255, 255, 255})
        : width_(width), height_(height),
          pix_(static_cast<size_t>(width) * height * 3) {
        if (width <= 0 || height <= 0) throw DataError("image dimensions must be positive");
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) set(x, y, fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }

    Rgb get(int x, int y) const {
        const uint8_t* p = &pix_[idx(x, y)];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb c) {
        uint8_t* p = &pix_[idx(x, y)];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width_ && y >= 0 && y < height_;
    }

    // Luma in [0,1]; Rec.601 weights.
    double gray(int x, int y) const {
        Rgb c = get(x, y);
        return (0.299 * c.r + 0.587 * c.g + 0.114 * c.b) / 255.0;
    }

    const std::vector<uint8_t>& raw() const { return pix_; }
    bool operator==(const Image&) const = default;

private:
    size_t idx(int x, int y) const {
        if (!in_bounds(x, y)) throw DataError("pixel access out of bounds");
        return (static_cast<size_t>(y) * width_ + x) * 3;
    }

    int width_ = 0, height_ = 0;
    std::vector<uint8_t> pix_;
};

namespace detail {

inline void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline uint32_t get_u32be(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void png_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& data) {
    put_u32be(out, static_cast<uint32_t>(data.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = static_cast<uint32_t>(
        ::crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32be(out, crc);
}

inline uint8_t paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
    if (pb <= pc) return static_cast<uint8_t>(b);
    return static_cast<uint8_t>(c);
}

} // namespace detail

inline std::vector<uint8_t> png_encode(const Image& img) {
    const int w = img.width(), h = img.height();
    // filter byte 0 per scanline, raw RGB after
    std::vector<uint8_t> scan;
    scan.reserve(static_cast<size_t>(h) * (1 + 3 * w));
    for (int y = 0; y < h; ++y) {
        scan.push_back(0);
        for (int x = 0; x < w; ++x) {
            Rgb c = img.get(x, y);
            scan.push_back(c.r);
            scan.push_back(c.g);
            scan.push_back(c.b);
        }
    }
    uLongf bound = ::compressBound(static_cast<uLong>(scan.size()));
    std::vector<uint8_t> z(bound);
    if (::compress2(z.data(), &bound, scan.data(), static_cast<uLong>(scan.size()), 6) != Z_OK)
        throw Error("png: deflate failed");
    z.resize(bound);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    std::vector<uint8_t> ihdr;
    detail::put_u32be(ihdr, static_cast<uint32_t>(w));
    detail::put_u32be(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type: truecolor
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // no interlace
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", z);
    detail::png_chunk(out, "IEND", {});
    return out;
}

inline Image png_decode(const std::vector<uint8_t>& buf) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
        throw DataError("png: bad signature");

    uint32_t w = 0, h = 0;
    int color_type = -1;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool saw_end = false;
    while (pos + 8 <= buf.size()) {
        uint32_t len = detail::get_u32be(&buf[pos]);
        if (pos + 12 + static_cast<size_t>(len) > buf.size())
            throw DataError("png: truncated chunk");
        std::string type(reinterpret_cast<const char*>(&buf[pos + 4]), 4);
        const uint8_t* data = &buf[pos + 8];
        uint32_t crc_stored = detail::get_u32be(&buf[pos + 8 + len]);
        uint32_t crc_calc = static_cast<uint32_t>(
            ::crc32(0, &buf[pos + 4], static_cast<uInt>(4 + len)));
        if (crc_stored != crc_calc) throw DataError("png: chunk crc mismatch in " + type);

        if (type == "IHDR") {
            if (len != 13) throw DataError("png: bad IHDR length");
            w = detail::get_u32be(data);
            h = detail::get_u32be(data + 4);
            int bit_depth = data[8];
            color_type = data[9];
            int interlace = data[12];
            if (bit_depth != 8) throw DataError("png: only 8-bit depth supported");
            if (color_type != 0 && color_type != 2 && color_type != 6)
                throw DataError("png: unsupported color type");
            if (interlace != 0) throw DataError("png: interlaced files not supported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            saw_end = true;
            break;
        }
        // ancillary chunks are skipped
        pos += 12 + len;
    }
    if (!saw_end) throw DataError("png: missing IEND");
    if (w == 0 || h == 0 || color_type < 0) throw DataError("png: missing IHDR");
    if (w > 1 << 20 || h > 1 << 20) throw DataError("png: unreasonable dimensions");

    const int ch = color_type == 0 ? 1 : color_type == 2 ? 3 : 4;
    const size_t stride = static_cast<size_t>(w) * ch;
    std::vector<uint8_t> scan(static_cast<size_t>(h) * (stride + 1));
    uLongf out_len = static_cast<uLongf>(scan.size());
    int zr = ::uncompress(scan.data(), &out_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zr != Z_OK || out_len != scan.size()) throw DataError("png: inflate failed");

    // undo per-row filters in place, writing into `prev`-relative raw buffer
    std::vector<uint8_t> raw(static_cast<size_t>(h) * stride);
    for (uint32_t y = 0; y < h; ++y) {
        uint8_t filter = scan[y * (stride + 1)];
        const uint8_t* src = &scan[y * (stride + 1) + 1];
        uint8_t* dst = &raw[y * stride];
        const uint8_t* up = y ? &raw[(y - 1) * stride] : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= static_cast<size_t>(ch) ? dst[i - ch] : 0;
            int b = up ? up[i] : 0;
            int c = (up && i >= static_cast<size_t>(ch)) ? up[i - ch] : 0;
            int x = src[i];
            switch (filter) {
                case 0: dst[i] = static_cast<uint8_t>(x); break;
                case 1: dst[i] = static_cast<uint8_t>(x + a); break;
                case 2: dst[i] = static_cast<uint8_t>(x + b); break;
                case 3: dst[i] = static_cast<uint8_t>(x + (a + b) / 2); break;
                case 4: dst[i] = static_cast<uint8_t>(x + detail::paeth(a, b, c)); break;
                default: throw DataError("png: unknown row filter");
            }
        }
    }

    Image img(static_cast<int>(w), static_cast<int>(h));
    for (uint32_t y = 0; y < h; ++y)
        for (uint32_t x = 0; x < w; ++x) {
            const uint8_t* p = &raw[y * stride + x * ch];
            Rgb c = ch == 1 ? Rgb{p[0], p[0], p[0]} : Rgb{p[0], p[1], p[2]};
            img.set(static_cast<int>(x), static_cast<int>(y), c);
        }
    return img;
}

inline void png_write(const std::string& path, const Image& img) {
    write_file(path, png_encode(img));
}

inline Image png_read(const std::string& path) {
    try {
        return png_decode(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void ppm_write(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path);
    f << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.raw().data()),
            static_cast<std::streamsize>(img.raw().size()));
    if (!f) throw Error("write failed: " + path);
}

inline Image ppm_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw DataError(path + ": not a P6 ppm");
    int w, h, maxval;
    f >> w >> h >> maxval;
    if (!f || w <= 0 || h <= 0) throw DataError(path + ": bad ppm header");
    if (maxval != 255) throw DataError(path + ": only maxval 255 supported");
    f.get(); // single whitespace after header
    Image img(w, h);
    std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw DataError(path + ": truncated pixel data");
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const uint8_t* p = &raw[(static_cast<size_t>(y) * w + x) * 3];
            img.set(x, y, {p[0], p[1], p[2]});
        }
    return img;
}

// Picks codec from the file extension (.png or .ppm).
inline void image_write(const std::string& path, const Image& img) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm")
        ppm_write(path, img);
    else
        png_write(path, img);
}

inline Image image_read(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".ppm") return ppm_read(path);
    return png_read(path);
}

} // namespace diakrit
