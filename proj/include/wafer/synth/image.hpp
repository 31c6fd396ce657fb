#pragma once

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <vector>

namespace wafer::synth {

/// Single-channel row-major image. ImageU8 holds 0..255 bytes; ImageF holds
/// floats on either the 0..255 or the 0..1 scale depending on the stage.
/// An empty image (0x0) stands for "no mask".
template <typename T>
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), pixels(h * w, fill) {}

  bool empty() const noexcept { return pixels.empty(); }
  T& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  T at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

  /// Sum of pixel values (mask mass).
  double total() const { return std::accumulate(pixels.begin(), pixels.end(), 0.0); }
  double mean() const { return pixels.empty() ? 0.0 : total() / static_cast<double>(pixels.size()); }

  friend bool operator==(const Image&, const Image&) = default;
};

using ImageU8 = Image<std::uint8_t>;
using ImageF = Image<float>;

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const ImageU8& img);

/// Throws FileError if unreadable, UnsupportedFormatError for maxval > 255 or
/// ASCII PGM, ParseError for anything else malformed.
ImageU8 read_pgm(const std::filesystem::path& path);

/// Rounds and clamps to 0..255.
ImageU8 to_u8(const ImageF& img);
ImageF to_float(const ImageU8& img);

}  // namespace wafer::synth
