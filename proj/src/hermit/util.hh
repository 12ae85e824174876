#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace hermit {

namespace fs = std::filesystem;

/**
 * Base class for all errors raised by the library.  Subclasses exist
 * where callers need to distinguish failure kinds (usage vs. integrity
 * vs. build).
 */
class Error : public std::runtime_error
{
public:
    explicit Error(const std::string & msg) : std::runtime_error(msg) {}

    template<typename... Args>
    explicit Error(fmt::format_string<Args...> f, Args &&... args)
        : std::runtime_error(fmt::format(f, std::forward<Args>(args)...))
    {
    }
};

/** A store invariant was violated (corrupt DB, digest mismatch, dangling reference). */
class IntegrityError : public Error
{
public:
    using Error::Error;
};

/** Caller passed something malformed (bad name, bad recipe, unknown package). */
class UsageError : public Error
{
public:
    using Error::Error;
};

std::string readFile(const fs::path & path);
void writeFile(const fs::path & path, std::string_view contents);

/** Write to `path.tmpXXX` then rename(2) into place. */
void writeFileAtomic(const fs::path & path, std::string_view contents);

/** Create a symlink atomically, replacing any existing one. */
void replaceSymlink(const fs::path & target, const fs::path & link);

/** Recursively delete, chmod'ing read-only directories as needed. Returns bytes freed. */
uint64_t deletePathRecursive(const fs::path & path);

std::vector<std::string> splitString(std::string_view s, char sep);
std::string joinStrings(const std::vector<std::string> & parts, std::string_view sep);

/**
 * Percent-encode the bytes `% ; , = [ ] ( )` and everything below 0x20,
 * uppercase hex.  Inverse is percentDecode, which rejects malformed
 * escapes.
 */
std::string percentEncode(std::string_view s);
std::string percentDecode(std::string_view s);

std::string getEnvOr(const char * var, std::string_view dflt);

/** $HOME, or throws if unset. */
fs::path homeDir();

}  // namespace hermit
