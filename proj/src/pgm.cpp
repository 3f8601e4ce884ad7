#include "mriq/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mriq::pgm {

void write_pgm(const std::filesystem::path& path, const ImageU8& image) {
  if (image.w < 1 || image.h < 1 ||
      image.pixels.size() != static_cast<size_t>(image.w) * image.h)
    throw Error("write_pgm: inconsistent image dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_pgm: cannot open " + path.string());
  out << "P5\n" << image.w << " " << image.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error("write_pgm: write failed for " + path.string());
}

namespace {

// Next whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

ImageU8 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_pgm: cannot open " + path.string());
  if (next_token(in) != "P5")
    throw Error("read_pgm: " + path.string() + " is not a binary PGM");
  ImageU8 img;
  try {
    img.w = std::stoi(next_token(in));
    img.h = std::stoi(next_token(in));
    int maxval = std::stoi(next_token(in));
    if (maxval != 255)
      throw Error("read_pgm: " + path.string() + " has maxval " +
                  std::to_string(maxval) + ", expected 255");
  } catch (const std::logic_error&) {
    throw Error("read_pgm: malformed header in " + path.string());
  }
  if (img.w < 1 || img.h < 1)
    throw Error("read_pgm: malformed header in " + path.string());
  img.pixels.resize(static_cast<size_t>(img.w) * img.h);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw Error("read_pgm: truncated pixel data in " + path.string());
  return img;
}

ImageU8 quantize(const kspace::RealGrid& grid) {
  ImageU8 img;
  img.w = grid.w;
  img.h = grid.h;
  img.pixels.resize(grid.v.size());
  for (size_t i = 0; i < grid.v.size(); ++i) {
    double v = std::clamp(grid.v[i], 0.0, 1.0);
    img.pixels[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

}  // namespace mriq::pgm
