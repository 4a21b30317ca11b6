#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evolvis {

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major 8-bit RGB raster.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {0, 0, 0});
    Image(int width, int height, std::vector<std::uint8_t> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0; }

    // Const so that `img.at(x, y) = c` fails to compile; use set().
    const Rgb at(int x, int y) const;
    void set(int x, int y, Rgb c);

    std::span<const std::uint8_t> bytes() const { return pixels_; }
    std::span<std::uint8_t> bytes() { return pixels_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t offset(int x, int y) const;

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

class ImageError : public std::runtime_error {
public:
    enum class Code { InvalidDimensions, DimensionMismatch, TooFewImages, MalformedPPM, MalformedPNG };

    ImageError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Grayscale per-pixel comparison of k ≥ 2 equally sized images. Channels are
/// normalised to [0,1], their population variances across the stack averaged,
/// and sqrt(avg)/0.5 (clamped to 1) mapped to [0,255]. Equal stacks give black.
Image varianceImage(std::span<const Image> images);

/// Pre-quantisation value in [0,1] for one pixel; exposed for tests.
double varianceValue(std::span<const Image> images, int x, int y);

std::string encodePPM(const Image& img);
Image decodePPM(std::string_view bytes);

std::string encodePNG(const Image& img);
Image decodePNG(std::string_view bytes);

/// Dispatches on the file signature (P6 or PNG).
Image decodeImage(std::string_view bytes);

}  // namespace evolvis
