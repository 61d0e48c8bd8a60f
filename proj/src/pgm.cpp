#include "fabloop/pgm.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace fabloop {

namespace {

// Skips whitespace and '#' comments, then parses one nonnegative integer.
int next_header_int(std::istream& in, const char* what) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || c < '0' || c > '9')
        throw ParseError(std::string("PGM: expected ") + what);
    long value = 0;
    while (c >= '0' && c <= '9') {
        value = value * 10 + (c - '0');
        if (value > 1000000) throw ParseError(std::string("PGM: ") + what + " out of range");
        c = in.get();
    }
    if (c != EOF) in.unget();
    return static_cast<int>(value);
}

}  // namespace

GrayImage read_pgm(std::istream& in) {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw ParseError("PGM: not a binary P5 file");

    const int width = next_header_int(in, "width");
    const int height = next_header_int(in, "height");
    const int maxval = next_header_int(in, "maxval");
    if (width < 1 || height < 1) throw ParseError("PGM: dimensions must be >= 1");
    if (maxval < 1 || maxval > 255) throw ParseError("PGM: maxval must be in [1, 255]");

    // Exactly one whitespace byte separates the header from the raster.
    const int sep = in.get();
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
        throw ParseError("PGM: missing whitespace before raster");

    GrayImage img(width, height);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw ParseError("PGM: truncated raster");
    return img;
}

GrayImage read_pgm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    return read_pgm(in);
}

void write_pgm(std::ostream& out, const GrayImage& img) {
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
}

void write_pgm_file(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_pgm(out, img);
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace fabloop
