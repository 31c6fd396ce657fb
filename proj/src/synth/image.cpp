#include "wafer/synth/image.hpp"

#include <cctype>
#include <fstream>
#include <algorithm>
#include <cmath>
#include <string>

#include "wafer/errors.hpp"

namespace wafer::synth {

ImageU8 to_u8(const ImageF& img) {
  ImageU8 out(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels[i], 0.0f, 255.0f)));
  }
  return out;
}

ImageF to_float(const ImageU8& img) {
  ImageF out(img.height, img.width);
  std::copy(img.pixels.begin(), img.pixels.end(), out.pixels.begin());
  return out;
}

void write_pgm(const std::filesystem::path& path, const ImageU8& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out.flush()) throw FileError("write failed for " + path.string());
}

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, std::string where) : b_(bytes), where_(std::move(where)) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_ || pos_ - start > 9) throw ParseError(where_ + ": bad " + what + " in PGM header");
    return std::stoul(b_.substr(start, pos_ - start));
  }

  std::size_t& pos() { return pos_; }

 private:
  const std::string& b_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageU8 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open image " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < 2 || bytes[0] != 'P') throw ParseError(where + ": not a PGM file");
  if (bytes[1] == '2') throw UnsupportedFormatError(where + ": ASCII PGM (P2) is not supported");
  if (bytes[1] != '5') throw ParseError(where + ": not a binary PGM (P5)");

  HeaderReader h(bytes, where);
  h.pos() = 2;
  const unsigned long width = h.number("width");
  const unsigned long height = h.number("height");
  const unsigned long maxval = h.number("maxval");
  if (width == 0 || height == 0) throw ParseError(where + ": zero image dimension");
  if (maxval == 0) throw ParseError(where + ": maxval 0");
  if (maxval > 255) {
    throw UnsupportedFormatError(where + ": maxval " + std::to_string(maxval) + " (only 8-bit is supported)");
  }
  std::size_t& pos = h.pos();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError(where + ": missing whitespace after maxval");
  }
  ++pos;
  const std::size_t n = width * height;
  if (bytes.size() - pos < n) {
    throw ParseError(where + ": pixel data truncated (" + std::to_string(bytes.size() - pos) + " of " +
                     std::to_string(n) + " bytes)");
  }
  ImageU8 img(height, width);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
            bytes.begin() + static_cast<std::ptrdiff_t>(pos + n), img.pixels.begin());
  if (maxval != 255) {
    for (auto& p : img.pixels) {
      p = static_cast<std::uint8_t>((static_cast<unsigned>(p) * 255 + maxval / 2) / maxval);
    }
  }
  return img;
}

}  // namespace wafer::synth
