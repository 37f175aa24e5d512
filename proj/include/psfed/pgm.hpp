#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace psfed {

// Binary (P5) 8-bit PGM, maxval 255.
void write_pgm(const std::filesystem::path& path, int height, int width,
               const std::vector<std::uint8_t>& pixels);

struct PgmImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace psfed
