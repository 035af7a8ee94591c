#include "deva/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace deva {
namespace {

bool has_suffix(const std::string& s, const char* suf) {
    size_t n = std::strlen(suf);
    if (s.size() < n) return false;
    std::string tail = s.substr(s.size() - n);
    std::transform(tail.begin(), tail.end(), tail.begin(), ::tolower);
    return tail == suf;
}

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

void open_png_read(PngReader& r, FILE* fp, const std::string& path) {
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw Error("not a PNG file: " + path);
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    r.info = png_create_info_struct(r.png);
    if (!r.png || !r.info) throw Error("libpng init failed");
    if (setjmp(png_jmpbuf(r.png))) throw Error("PNG read error: " + path);
    png_init_io(r.png, fp);
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);
}

RgbImage read_rgb_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error("cannot open image: " + path);
    PngReader r;
    open_png_read(r, fp.get(), path);
    if (setjmp(png_jmpbuf(r.png))) throw Error("PNG read error: " + path);

    png_uint_32 w, h;
    int bit_depth, color_type;
    png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (bit_depth == 16) png_set_strip_16(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(r.png);
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);

    RgbImage img{int(w), int(h)};
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.data.data() + size_t(y) * 3 * w;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

Raw16Image read_gray_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error("cannot open image: " + path);
    PngReader r;
    open_png_read(r, fp.get(), path);
    if (setjmp(png_jmpbuf(r.png))) throw Error("PNG read error: " + path);

    png_uint_32 w, h;
    int bit_depth, color_type;
    png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (color_type != PNG_COLOR_TYPE_GRAY)
        throw Error("expected grayscale image: " + path);
    if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (bit_depth == 16) png_set_swap(r.png);  // PNG is big-endian on disk
    png_read_update_info(r.png, r.info);

    Raw16Image img{int(w), int(h)};
    if (bit_depth == 16) {
        std::vector<png_bytep> rows(h);
        for (png_uint_32 y = 0; y < h; ++y)
            rows[y] = reinterpret_cast<png_bytep>(img.data.data() + size_t(y) * w);
        png_read_image(r.png, rows.data());
    } else {
        std::vector<uint8_t> buf(size_t(w) * h);
        std::vector<png_bytep> rows(h);
        for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + size_t(y) * w;
        png_read_image(r.png, rows.data());
        for (size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i];
    }
    png_read_end(r.png, nullptr);
    return img;
}

void open_png_write(PngWriter& wr, FILE* fp, int w, int h, int bit_depth, int color_type) {
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    wr.info = png_create_info_struct(wr.png);
    if (!wr.png || !wr.info) throw Error("libpng init failed");
    if (setjmp(png_jmpbuf(wr.png))) throw Error("PNG write error");
    png_init_io(wr.png, fp);
    png_set_IHDR(wr.png, wr.info, png_uint_32(w), png_uint_32(h), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
}

void write_rgb_png(const std::string& path, const RgbImage& img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("cannot write image: " + path);
    PngWriter wr;
    open_png_write(wr, fp.get(), img.width, img.height, 8, PNG_COLOR_TYPE_RGB);
    if (setjmp(png_jmpbuf(wr.png))) throw Error("PNG write error: " + path);
    for (int y = 0; y < img.height; ++y)
        png_write_row(wr.png, const_cast<png_bytep>(img.data.data() + size_t(y) * 3 * img.width));
    png_write_end(wr.png, nullptr);
}

void write_gray16_png(const std::string& path, const Raw16Image& img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("cannot write image: " + path);
    PngWriter wr;
    open_png_write(wr, fp.get(), img.width, img.height, 16, PNG_COLOR_TYPE_GRAY);
    if (setjmp(png_jmpbuf(wr.png))) throw Error("PNG write error: " + path);
    std::vector<uint8_t> row(size_t(img.width) * 2);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            uint16_t v = img.at(x, y);
            row[2 * x] = uint8_t(v >> 8);
            row[2 * x + 1] = uint8_t(v & 0xff);
        }
        png_write_row(wr.png, row.data());
    }
    png_write_end(wr.png, nullptr);
}

void write_gray8_png(const std::string& path, const std::vector<uint8_t>& data, int w, int h) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("cannot write image: " + path);
    PngWriter wr;
    open_png_write(wr, fp.get(), w, h, 8, PNG_COLOR_TYPE_GRAY);
    if (setjmp(png_jmpbuf(wr.png))) throw Error("PNG write error: " + path);
    for (int y = 0; y < h; ++y)
        png_write_row(wr.png, const_cast<png_bytep>(data.data() + size_t(y) * w));
    png_write_end(wr.png, nullptr);
}

// ---------------------------------------------------------------------------
// PNM (binary P5 / P6)
// ---------------------------------------------------------------------------

int pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments, returns next integer.
    char c;
    while (in.get(c)) {
        if (c == '#') {
            while (in.get(c) && c != '\n') {
            }
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            in.unget();
            break;
        }
    }
    int v = -1;
    in >> v;
    return v;
}

void read_pnm_header(std::istream& in, const std::string& path, const char* magic, int& w,
                     int& h, int& maxval) {
    char m0, m1;
    in.get(m0);
    in.get(m1);
    if (m0 != magic[0] || m1 != magic[1]) throw Error("bad PNM magic in " + path);
    w = pnm_token(in);
    h = pnm_token(in);
    maxval = pnm_token(in);
    if (w <= 0 || h <= 0 || maxval <= 0) throw Error("bad PNM header in " + path);
    in.get();  // single whitespace before raster
}

RgbImage read_rgb_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image: " + path);
    int w, h, maxval;
    read_pnm_header(in, path, "P6", w, h, maxval);
    if (maxval != 255) throw Error("only 8-bit PPM supported: " + path);
    RgbImage img(w, h);
    in.read(reinterpret_cast<char*>(img.data.data()), std::streamsize(img.data.size()));
    if (!in) throw Error("truncated PPM: " + path);
    return img;
}

Raw16Image read_gray_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image: " + path);
    int w, h, maxval;
    read_pnm_header(in, path, "P5", w, h, maxval);
    Raw16Image img(w, h);
    if (maxval > 255) {
        std::vector<uint8_t> buf(size_t(w) * h * 2);
        in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
        if (!in) throw Error("truncated PGM: " + path);
        for (size_t i = 0; i < img.data.size(); ++i)
            img.data[i] = uint16_t((buf[2 * i] << 8) | buf[2 * i + 1]);
    } else {
        std::vector<uint8_t> buf(size_t(w) * h);
        in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
        if (!in) throw Error("truncated PGM: " + path);
        for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = buf[i];
    }
    return img;
}

void write_rgb_ppm(const std::string& path, const RgbImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), std::streamsize(img.data.size()));
}

void write_gray16_pgm(const std::string& path, const Raw16Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<uint8_t> buf(img.data.size() * 2);
    for (size_t i = 0; i < img.data.size(); ++i) {
        buf[2 * i] = uint8_t(img.data[i] >> 8);
        buf[2 * i + 1] = uint8_t(img.data[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

void write_gray8_pgm(const std::string& path, const std::vector<uint8_t>& data, int w, int h) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image: " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
}

}  // namespace

RgbImage read_rgb(const std::string& path) {
    if (has_suffix(path, ".ppm")) return read_rgb_ppm(path);
    return read_rgb_png(path);
}

Raw16Image read_raw16(const std::string& path) {
    if (has_suffix(path, ".pgm")) return read_gray_pgm(path);
    return read_gray_png(path);
}

BinaryMask read_mask(const std::string& path) {
    Raw16Image raw = read_raw16(path);
    BinaryMask m(raw.width, raw.height);
    for (size_t i = 0; i < raw.data.size(); ++i) m.bits[i] = raw.data[i] >= 128 ? 1 : 0;
    return m;
}

void write_rgb(const std::string& path, const RgbImage& img) {
    if (has_suffix(path, ".ppm")) return write_rgb_ppm(path, img);
    write_rgb_png(path, img);
}

void write_raw16(const std::string& path, const Raw16Image& img) {
    if (has_suffix(path, ".pgm")) return write_gray16_pgm(path, img);
    write_gray16_png(path, img);
}

void write_mask(const std::string& path, const BinaryMask& mask) {
    std::vector<uint8_t> data(mask.bits.size());
    for (size_t i = 0; i < data.size(); ++i) data[i] = mask.bits[i] ? 255 : 0;
    if (has_suffix(path, ".pgm")) return write_gray8_pgm(path, data, mask.width, mask.height);
    write_gray8_png(path, data, mask.width, mask.height);
}

void write_gray8(const std::string& path, const GrayImage& img) {
    std::vector<uint8_t> data(img.data.size());
    for (size_t i = 0; i < data.size(); ++i)
        data[i] = uint8_t(std::clamp(std::lround(img.data[i]), 0L, 255L));
    if (has_suffix(path, ".pgm")) return write_gray8_pgm(path, data, img.width, img.height);
    write_gray8_png(path, data, img.width, img.height);
}

}  // namespace deva
