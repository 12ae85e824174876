#include "hermit/hash.hh"

#include <cstring>

#include <openssl/evp.h>

#include "hermit/util.hh"

namespace hermit {

Sha256::Sha256()
{
    EVP_MD_CTX * c = EVP_MD_CTX_new();
    if (!c || EVP_DigestInit_ex(c, EVP_sha256(), nullptr) != 1)
        throw Error("cannot initialize SHA-256 context");
    ctx = c;
}

Sha256::~Sha256()
{
    EVP_MD_CTX_free(static_cast<EVP_MD_CTX *>(ctx));
}

void Sha256::update(std::string_view data)
{
    update(data.data(), data.size());
}

void Sha256::update(const void * data, size_t len)
{
    if (done)
        throw Error("SHA-256 context already finished");
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX *>(ctx), data, len) != 1)
        throw Error("SHA-256 update failed");
}

Sha256Digest Sha256::finish()
{
    Sha256Digest out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX *>(ctx), out.data(), &len) != 1 || len != 32)
        throw Error("SHA-256 finalization failed");
    done = true;
    return out;
}

Sha256Digest Sha256::hash(std::string_view data)
{
    Sha256 h;
    h.update(data);
    return h.finish();
}

std::string hexEncode(const uint8_t * data, size_t len)
{
    static const char hex[] = "0123456789abcdef";
    std::string res;
    res.reserve(len * 2);
    for (size_t i = 0; i < len; ++i) {
        res += hex[data[i] >> 4];
        res += hex[data[i] & 0xf];
    }
    return res;
}

std::string hexEncode(const Sha256Digest & d)
{
    return hexEncode(d.data(), d.size());
}

static const char kBase32Alphabet[] = "0123456789abcdfghijklmnpqrsvwxyz";

std::string base32Encode(const uint8_t * data, size_t len)
{
    std::string res;
    res.reserve((len * 8 + 4) / 5);
    uint32_t acc = 0;
    int bits = 0;
    for (size_t i = 0; i < len; ++i) {
        acc = (acc << 8) | data[i];
        bits += 8;
        while (bits >= 5) {
            bits -= 5;
            res += kBase32Alphabet[(acc >> bits) & 0x1f];
        }
    }
    if (bits > 0)
        res += kBase32Alphabet[(acc << (5 - bits)) & 0x1f];
    return res;
}

std::string base32Encode(std::string_view bytes)
{
    return base32Encode(reinterpret_cast<const uint8_t *>(bytes.data()), bytes.size());
}

static int base32Value(char c)
{
    const char * p = strchr(kBase32Alphabet, c);
    if (!p || c == '\0')
        return -1;
    return static_cast<int>(p - kBase32Alphabet);
}

std::string base32Decode(std::string_view encoded, size_t byteLen)
{
    size_t expectChars = (byteLen * 8 + 4) / 5;
    if (encoded.size() != expectChars)
        throw Error("base32 string has length {}, expected {}", encoded.size(), expectChars);

    std::string res;
    res.reserve(byteLen);
    uint32_t acc = 0;
    int bits = 0;
    for (char c : encoded) {
        int v = base32Value(c);
        if (v < 0)
            throw Error("invalid base32 character '{}'", c);
        acc = (acc << 5) | static_cast<uint32_t>(v);
        bits += 5;
        if (bits >= 8) {
            bits -= 8;
            if (res.size() < byteLen)
                res += static_cast<char>((acc >> bits) & 0xff);
        }
    }
    // Trailing pad bits must be zero for the encoding to be canonical.
    if (bits > 0 && (acc & ((1u << bits) - 1)) != 0)
        throw Error("base32 string has nonzero padding bits");
    if (res.size() != byteLen)
        throw Error("base32 decode produced {} bytes, expected {}", res.size(), byteLen);
    return res;
}

bool isBase32(std::string_view s)
{
    for (char c : s)
        if (base32Value(c) < 0)
            return false;
    return !s.empty();
}

std::string sha256Hex(std::string_view data)
{
    auto d = Sha256::hash(data);
    return hexEncode(d);
}

std::string sha256Base32(std::string_view data)
{
    auto d = Sha256::hash(data);
    return base32Encode(d.data(), d.size());
}

}  // namespace hermit
