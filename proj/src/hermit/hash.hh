#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace hermit {

using Sha256Digest = std::array<uint8_t, 32>;

/** Incremental SHA-256. */
class Sha256
{
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256 &) = delete;
    Sha256 & operator=(const Sha256 &) = delete;

    void update(std::string_view data);
    void update(const void * data, size_t len);
    Sha256Digest finish();

    static Sha256Digest hash(std::string_view data);

private:
    void * ctx;
    bool done = false;
};

std::string hexEncode(const uint8_t * data, size_t len);
std::string hexEncode(const Sha256Digest & d);

/**
 * Base32 over the alphabet "0123456789abcdfghijklmnpqrsvwxyz", 5 bits
 * per character, most-significant group first.  The final group is
 * zero-padded on the low end when the bit count is not a multiple of 5
 * (52 characters for 256 bits; 32 characters for 160 bits, exact).
 */
std::string base32Encode(const uint8_t * data, size_t len);
std::string base32Encode(std::string_view bytes);

/** Inverse of base32Encode for a known byte length; rejects bad characters and nonzero padding. */
std::string base32Decode(std::string_view encoded, size_t byteLen);

bool isBase32(std::string_view s);

/** "<64 hex chars>" of SHA-256 of the given bytes. */
std::string sha256Hex(std::string_view data);

/** 52-character base32 of SHA-256 of the given bytes. */
std::string sha256Base32(std::string_view data);

}  // namespace hermit
