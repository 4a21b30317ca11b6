#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace evolvis {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of an arbitrary byte sequence.
Digest sha256(std::string_view bytes);

/// Incremental SHA-256 for canonical encodings built piecewise.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view bytes);
    void updateU64BigEndian(std::uint64_t value);
    Digest finish();

private:
    void* ctx_;
};

std::string toHex(std::span<const std::uint8_t> bytes);
std::string toHex(std::uint64_t value);

/// Parses exactly `out.size()` bytes of lowercase or uppercase hex.
bool fromHex(std::string_view hex, std::span<std::uint8_t> out);

std::optional<std::uint64_t> u64FromHex(std::string_view hex);

std::string base64Encode(std::string_view bytes);
std::optional<std::string> base64Decode(std::string_view text);

}  // namespace evolvis
