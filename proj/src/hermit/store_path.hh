#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace hermit {

/**
 * Identity of a store item: a 32-character base32 digest plus a
 * human-readable name.  Rendered as "<root>/<digest>-<name>"; the root
 * is the store's *logical* root, so rendered forms are portable across
 * machines that agree on it.
 */
class StorePath
{
public:
    static constexpr size_t digestLen = 32;

    StorePath(std::string digest, std::string name);

    /** Parse "<digest>-<name>" (the basename of a rendered path). */
    static StorePath parseBaseName(std::string_view baseName);

    /** Parse a full rendered form against a known logical root. */
    static StorePath parseRendered(std::string_view rendered, std::string_view logicalRoot);

    const std::string & digest() const { return digest_; }
    const std::string & name() const { return name_; }

    std::string baseName() const { return digest_ + "-" + name_; }
    std::string render(std::string_view logicalRoot) const;

    auto operator<=>(const StorePath &) const = default;

    static bool isValidName(std::string_view name);

private:
    std::string digest_;
    std::string name_;
};

}  // namespace hermit
