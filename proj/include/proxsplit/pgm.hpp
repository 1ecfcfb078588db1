#pragma once

#include "proxsplit/linops.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>

namespace proxsplit {

class PgmError : public std::runtime_error {
 public:
  PgmError(const std::string& what, std::size_t offset)
      : std::runtime_error("pgm: " + what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

enum class PgmEncoding { ascii, binary };  // P2, P5

namespace detail {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(const std::string& data) : d_(data) {}

  void skip_space_and_comments() {
    while (pos_ < d_.size()) {
      if (std::isspace(static_cast<unsigned char>(d_[pos_]))) {
        ++pos_;
      } else if (d_[pos_] == '#') {
        while (pos_ < d_.size() && d_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    last_start_ = start;
    unsigned long v = 0;
    while (pos_ < d_.size() && std::isdigit(static_cast<unsigned char>(d_[pos_]))) {
      v = v * 10 + static_cast<unsigned long>(d_[pos_] - '0');
      if (v > 1000000000UL) throw PgmError(std::string(what) + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) throw PgmError(std::string("expected ") + what, start);
    return v;
  }

  std::size_t& pos() { return pos_; }
  std::size_t last_start() const { return last_start_; }

 private:
  const std::string& d_;
  std::size_t pos_ = 0;
  std::size_t last_start_ = 0;
};

}  // namespace detail

/// Parses P2/P5 data; pixels are scaled to [0, 1] by 1/maxval.
inline ImageGrid pgm_parse(const std::string& data) {
  if (data.size() < 2 || data[0] != 'P' || (data[1] != '2' && data[1] != '5'))
    throw PgmError("missing P2/P5 magic number", 0);
  const bool binary = data[1] == '5';
  detail::PgmHeaderReader rd(data);
  rd.pos() = 2;
  const std::size_t after_magic = rd.pos();
  if (after_magic >= data.size() || !std::isspace(static_cast<unsigned char>(data[after_magic])))
    throw PgmError("expected whitespace after magic number", after_magic);
  const auto width = rd.number("width");
  const std::size_t width_at = rd.last_start();
  const auto height = rd.number("height");
  const std::size_t height_at = rd.last_start();
  const auto maxval = rd.number("maxval");
  const std::size_t maxval_at = rd.last_start();
  if (width == 0) throw PgmError("empty image", width_at);
  if (height == 0) throw PgmError("empty image", height_at);
  if (maxval == 0 || maxval > 65535) throw PgmError("maxval must be in 1..65535", maxval_at);

  const std::size_t count = width * height;
  Vector px(static_cast<Eigen::Index>(count));
  const double scale = static_cast<double>(maxval);
  if (binary) {
    std::size_t p = rd.pos();
    if (p >= data.size() || !std::isspace(static_cast<unsigned char>(data[p])))
      throw PgmError("expected single whitespace before raster", p);
    ++p;
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    if (data.size() - p < count * bytes) throw PgmError("truncated raster", data.size());
    for (std::size_t k = 0; k < count; ++k) {
      unsigned v = static_cast<unsigned char>(data[p + k * bytes]);
      if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(data[p + k * bytes + 1]);
      if (v > maxval) throw PgmError("sample exceeds maxval", p + k * bytes);
      px[static_cast<Eigen::Index>(k)] = v / scale;
    }
  } else {
    for (std::size_t k = 0; k < count; ++k) {
      const auto v = rd.number("sample");
      if (v > maxval) throw PgmError("sample exceeds maxval", rd.last_start());
      px[static_cast<Eigen::Index>(k)] = static_cast<double>(v) / scale;
    }
  }
  return ImageGrid(height, width, std::move(px));
}

inline ImageGrid pgm_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pgm_parse(data);
}

/// Clamps to [0, 1] and quantizes by round(pixel * maxval).
inline std::string pgm_format(const ImageGrid& g, unsigned maxval = 255,
                              PgmEncoding enc = PgmEncoding::binary) {
  if (maxval == 0 || maxval > 65535) throw std::invalid_argument("pgm: maxval must be in 1..65535");
  std::string out = (enc == PgmEncoding::binary ? "P5\n" : "P2\n") + std::to_string(g.cols) + " " +
                    std::to_string(g.rows) + "\n" + std::to_string(maxval) + "\n";
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double c = std::clamp(g.pixels[static_cast<Eigen::Index>(k)], 0.0, 1.0);
    const auto v = static_cast<unsigned>(std::lround(c * maxval));
    if (enc == PgmEncoding::binary) {
      if (maxval >= 256) out.push_back(static_cast<char>((v >> 8) & 0xFF));
      out.push_back(static_cast<char>(v & 0xFF));
    } else {
      out += std::to_string(v);
      out.push_back((k + 1) % g.cols == 0 ? '\n' : ' ');
    }
  }
  return out;
}

inline void pgm_write(const ImageGrid& g, const std::string& path, unsigned maxval = 255,
                      PgmEncoding enc = PgmEncoding::binary) {
  const std::string data = pgm_format(g, maxval, enc);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot write '" + path + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace proxsplit
