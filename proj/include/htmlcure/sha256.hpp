#pragma once
// Self-contained SHA-256 and SHA-1 (FIPS 180-4). SHA-256 backs frame hashes,
// DOM digests, and run config digests; SHA-1 exists solely for the RFC 6455
// websocket accept handshake.

#include <cstdint>
#include <string>
#include <string_view>

namespace htmlcure {

class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }

    // 32 raw bytes.
    std::string finish();

    // Lowercase hex of the full digest.
    static std::string hex(std::string_view data);
    // First 16 hex chars; enough for fixture/frame identities, keeps traces
    // readable.
    static std::string short_hex(std::string_view data) { return hex(data).substr(0, 16); }

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t state_[8];
    std::uint64_t bit_count_ = 0;
    std::uint8_t buffer_[64];
    std::size_t buffer_len_ = 0;
};

class Sha1 {
public:
    Sha1() { reset(); }
    void reset();
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::string finish(); // 20 raw bytes

private:
    void process_block(const std::uint8_t* block);
    std::uint32_t state_[5];
    std::uint64_t bit_count_ = 0;
    std::uint8_t buffer_[64];
    std::size_t buffer_len_ = 0;
};

} // namespace htmlcure
