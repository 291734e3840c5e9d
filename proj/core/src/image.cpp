#include "motiongait/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "motiongait/error.hpp"

namespace motiongait {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto bad = [&](const std::string& why) { return IngestionError(path.string() + ": " + why); };
  if (header_token(bytes, pos) != "P5") throw bad("not a binary PGM (P5)");
  long w = 0, h = 0, maxval = 0;
  try {
    w = std::stol(header_token(bytes, pos));
    h = std::stol(header_token(bytes, pos));
    maxval = std::stol(header_token(bytes, pos));
  } catch (const std::exception&) {
    throw bad("malformed header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw bad("unsupported dimensions or maxval");
  ++pos;  // single whitespace byte after maxval
  const auto n = static_cast<std::size_t>(w * h);
  if (bytes.size() < pos + n) throw bad("truncated pixel data");
  Image img(h, w);
  for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<float>(bytes[pos + i]) / static_cast<float>(maxval);
  return img;
}

std::vector<std::uint8_t> encode_pgm(const Image& image) {
  const std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels.size());
  for (const float v : image.pixels) {
    const float c = std::min(1.0f, std::max(0.0f, v));
    out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0f)));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  const auto bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace motiongait
