#include "evolvis/image_lab.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

namespace evolvis {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw ImageError(ImageError::Code::InvalidDimensions, "image dimensions must be positive");
    }
    pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) std::copy(fill.begin(), fill.end(), pixels_.begin() + static_cast<std::ptrdiff_t>(i));
}

Image::Image(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) {
        throw ImageError(ImageError::Code::InvalidDimensions, "image dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
        throw ImageError(ImageError::Code::InvalidDimensions, "pixel buffer size does not match dimensions");
    }
}

std::size_t Image::offset(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) throw std::out_of_range("pixel out of range");
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
}

const Rgb Image::at(int x, int y) const {
    auto o = offset(x, y);
    return {pixels_[o], pixels_[o + 1], pixels_[o + 2]};
}

void Image::set(int x, int y, Rgb c) {
    auto o = offset(x, y);
    std::copy(c.begin(), c.end(), pixels_.begin() + static_cast<std::ptrdiff_t>(o));
}

namespace {

void checkStack(std::span<const Image> images) {
    if (images.size() < 2) throw ImageError(ImageError::Code::TooFewImages, "variance needs at least two images");
    for (const auto& img : images) {
        if (img.width() != images[0].width() || img.height() != images[0].height()) {
            throw ImageError(ImageError::Code::DimensionMismatch, "variance inputs differ in size");
        }
    }
}

double pixelVariance(std::span<const Image> images, std::size_t offset) {
    const double k = static_cast<double>(images.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (const auto& img : images) mean += img.bytes()[offset + c] / 255.0;
        mean /= k;
        double var = 0.0;
        for (const auto& img : images) {
            double d = img.bytes()[offset + c] / 255.0 - mean;
            var += d * d;
        }
        sum += var / k;
    }
    double avg = sum / 3.0;
    return std::min(1.0, std::sqrt(avg) / 0.5);
}

}  // namespace

double varianceValue(std::span<const Image> images, int x, int y) {
    checkStack(images);
    if (x < 0 || y < 0 || x >= images[0].width() || y >= images[0].height()) throw std::out_of_range("pixel out of range");
    auto offset = (static_cast<std::size_t>(y) * static_cast<std::size_t>(images[0].width()) + static_cast<std::size_t>(x)) * 3;
    return pixelVariance(images, offset);
}

Image varianceImage(std::span<const Image> images) {
    checkStack(images);
    Image out(images[0].width(), images[0].height());
    auto dst = out.bytes();
    for (std::size_t o = 0; o < dst.size(); o += 3) {
        auto v = static_cast<std::uint8_t>(std::lround(255.0 * pixelVariance(images, o)));
        dst[o] = dst[o + 1] = dst[o + 2] = v;
    }
    return out;
}

std::string encodePPM(const Image& img) {
    std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    auto px = img.bytes();
    out.append(reinterpret_cast<const char*>(px.data()), px.size());
    return out;
}

namespace {

[[noreturn]] void malformedPPM(const std::string& why) {
    throw ImageError(ImageError::Code::MalformedPPM, "malformed PPM: " + why);
}

/// Reads one header integer, skipping whitespace and '#' comments.
long readHeaderInt(std::string_view bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        } else if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) malformedPPM("expected number");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
        v = v * 10 + (bytes[pos] - '0');
        if (v > 1'000'000) malformedPPM("number too large");
        ++pos;
    }
    return v;
}

}  // namespace

Image decodePPM(std::string_view bytes) {
    if (bytes.size() < 2 || bytes.substr(0, 2) != "P6") malformedPPM("missing P6 magic");
    std::size_t pos = 2;
    long w = readHeaderInt(bytes, pos);
    long h = readHeaderInt(bytes, pos);
    long maxval = readHeaderInt(bytes, pos);
    if (w <= 0 || h <= 0) malformedPPM("non-positive dimensions");
    if (maxval != 255) malformedPPM("maxval must be 255");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) malformedPPM("missing separator");
    ++pos;
    auto need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
    if (bytes.size() - pos < need) malformedPPM("truncated pixel data");
    std::vector<std::uint8_t> px(need);
    std::memcpy(px.data(), bytes.data() + pos, need);
    return Image(static_cast<int>(w), static_cast<int>(h), std::move(px));
}

std::string encodePNG(const Image& img) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width());
    png.height = static_cast<png_uint_32>(img.height());
    png.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.bytes().data(), 0, nullptr)) {
        throw std::runtime_error(std::string("png encode failed: ") + png.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.bytes().data(), 0, nullptr)) {
        throw std::runtime_error(std::string("png encode failed: ") + png.message);
    }
    out.resize(size);
    return out;
}

Image decodePNG(std::string_view bytes) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw ImageError(ImageError::Code::MalformedPNG, std::string("malformed PNG: ") + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, px.data(), 0, nullptr)) {
        png_image_free(&png);
        throw ImageError(ImageError::Code::MalformedPNG, std::string("malformed PNG: ") + png.message);
    }
    return Image(static_cast<int>(png.width), static_cast<int>(png.height), std::move(px));
}

Image decodeImage(std::string_view bytes) {
    if (bytes.starts_with("P6")) return decodePPM(bytes);
    if (bytes.starts_with("\x89PNG")) return decodePNG(bytes);
    throw ImageError(ImageError::Code::MalformedPPM, "unrecognised image format");
}

}  // namespace evolvis
