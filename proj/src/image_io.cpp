#include "flowseg/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace flowseg {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (std::isspace(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') tok += static_cast<char>(bytes[pos++]);
  if (tok.empty()) throw ImageFormatError("truncated PGM header");
  return tok;
}

std::size_t header_number(const std::vector<std::uint8_t>& bytes, std::size_t& pos, const char* what) {
  const std::string tok = header_token(bytes, pos);
  if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }) || tok.size() > 9) {
    throw ImageFormatError(std::string("bad PGM ") + what + " '" + tok + "'");
  }
  return std::stoul(tok);
}

void write_file(const std::filesystem::path& path, const std::string& head, const std::vector<std::uint8_t>& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << head;
  f.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

ScalarField read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const std::string magic = header_token(bytes, pos);
  if (magic != "P5") throw ImageFormatError("unsupported PGM variant '" + magic + "' (only binary P5)");
  const std::size_t width = header_number(bytes, pos, "width");
  const std::size_t height = header_number(bytes, pos, "height");
  const std::size_t maxval = header_number(bytes, pos, "maxval");
  if (maxval == 0 || maxval > 255) throw ImageFormatError("unsupported PGM maxval " + std::to_string(maxval));
  if (width == 0 || height == 0) throw ImageFormatError("PGM has zero size");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw ImageFormatError("truncated PGM header");
  ++pos;
  if (bytes.size() - pos < width * height) throw ImageFormatError("truncated PGM payload");
  ScalarField out(GridDomain(height, width));
  for (std::size_t i = 0; i < width * height; ++i) {
    out[i] = static_cast<double>(bytes[pos + i]) / static_cast<double>(maxval);
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const ScalarField& image) {
  const GridDomain d = image.domain();
  std::vector<std::uint8_t> body;
  body.reserve(d.size());
  for (double v : image.values()) body.push_back(to_byte(v));
  write_file(path, "P5\n" + std::to_string(d.width) + " " + std::to_string(d.height) + "\n255\n", body);
}

void write_ppm_overlay(const std::filesystem::path& path, const ScalarField& image,
                       const std::vector<std::pair<Contour, Rgb>>& contours) {
  const GridDomain d = image.domain();
  std::vector<std::uint8_t> body;
  body.reserve(3 * d.size());
  for (double v : image.values()) {
    const std::uint8_t g = to_byte(v);
    body.insert(body.end(), {g, g, g});
  }
  for (const auto& [contour, color] : contours) {
    for (const Pixel& p : contour) {
      if (p.row >= d.height || p.col >= d.width) {
        throw DomainError("contour pixel (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                          ") outside image " + to_string(d));
      }
      std::copy(color.begin(), color.end(), body.begin() + static_cast<std::ptrdiff_t>(3 * d.index(p.row, p.col)));
    }
  }
  write_file(path, "P6\n" + std::to_string(d.width) + " " + std::to_string(d.height) + "\n255\n", body);
}

ScalarField normalize_for_display(const ScalarField& f) {
  const auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
  ScalarField out(f.domain());
  const double range = *hi - *lo;
  if (range > 0.0) {
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = (f[i] - *lo) / range;
  }
  return out;
}

}  // namespace flowseg
