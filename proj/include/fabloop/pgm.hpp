#pragma once

#include <iosfwd>
#include <string>

#include "fabloop/image.hpp"

namespace fabloop {

/// Binary PGM (P5, maxval <= 255) reader/writer. Writing always emits
/// maxval 255; read(write(img)) reproduces the image bit-exactly.
GrayImage read_pgm(std::istream& in);
GrayImage read_pgm_file(const std::string& path);

void write_pgm(std::ostream& out, const GrayImage& img);
void write_pgm_file(const std::string& path, const GrayImage& img);

}  // namespace fabloop
