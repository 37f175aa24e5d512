#include "psfed/pgm.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace psfed {

void write_pgm(const std::filesystem::path& path, int height, int width,
               const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw std::runtime_error("short write on " + path.string());
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error("not a P5 PGM: " + path.string());
  int width = 0, height = 0, maxval = 0;
  in >> width >> height >> maxval;
  if (!in || width <= 0 || height <= 0 || maxval != 255)
    throw std::runtime_error("unsupported PGM header: " + path.string());
  in.get();  // single whitespace after header
  PgmImage img;
  img.height = height;
  img.width = width;
  img.pixels.resize(static_cast<std::size_t>(height) * width);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw std::runtime_error("truncated PGM: " + path.string());
  return img;
}

}  // namespace psfed
