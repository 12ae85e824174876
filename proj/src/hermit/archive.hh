#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "hermit/util.hh"

namespace hermit {

/**
 * Canonical serialization of one filesystem object.  The format is:
 *
 * ```
 *   archive := "HERMITAR1" object
 *   object  := file | symlink | dir
 *   file    := "F" execFlag(1 byte: 0|1) length(u64 LE) content
 *   symlink := "S" length(u64 LE) target
 *   dir     := "D" count(u64 LE) entry*        (sorted by name, bytewise)
 *   entry   := nameLength(u64 LE) name object
 * ```
 *
 * Equal bytes iff equal trees: entry order is forced, and nothing
 * outside (type, exec bit, content/target, names) is recorded.
 */
inline constexpr std::string_view kArchiveMagic = "HERMITAR1";

struct TreeEntry;

struct TreeFile
{
    bool executable = false;
    std::string contents;
    bool operator==(const TreeFile &) const = default;
};

struct TreeSymlink
{
    std::string target;
    bool operator==(const TreeSymlink &) const = default;
};

struct TreeDir
{
    std::map<std::string, TreeEntry> entries;
    bool operator==(const TreeDir &) const = default;
};

struct TreeEntry
{
    std::variant<TreeFile, TreeSymlink, TreeDir> node;
    bool operator==(const TreeEntry &) const = default;
};

/** Serialize an in-memory tree (magic included). */
std::string archiveSerialize(const TreeEntry & tree);

/** Parse archive bytes; rejects trailing garbage and malformed input. */
TreeEntry archiveParse(std::string_view bytes);

/**
 * Serialize the filesystem object at `path`.  Regular files record the
 * owner-executable bit only; special files (fifos, devices, sockets)
 * are rejected.
 */
std::string dumpPath(const fs::path & path);

/**
 * Materialize archive bytes at `dest` (must not exist) with canonical
 * on-disk metadata: mode 0444/0555, mtime 1.
 */
void restorePath(std::string_view bytes, const fs::path & dest);
void restoreTree(const TreeEntry & tree, const fs::path & dest);

/**
 * First entry (relative path) at which two archives differ, if any.
 * Used to report non-determinism findings readably.
 */
std::optional<std::string> archiveFirstDifference(std::string_view a, std::string_view b);

}  // namespace hermit
