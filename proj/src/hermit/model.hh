#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hermit/util.hh"

namespace hermit {

/** Where a package's source comes from.  Only file fetches exist here. */
struct Origin
{
    std::string method = "file-fetch";
    /** Absolute path after recipe loading (relative uris resolve against the recipe file). */
    std::string uri;
    /** 52-char base32 of the SHA-256 of the source's canonical archive bytes. */
    std::string sha256;

    bool operator==(const Origin &) const = default;
};

struct SearchPathSpec
{
    std::string variable;
    std::string subdirectory;
    std::string separator = ":";

    bool operator==(const SearchPathSpec &) const = default;
};

enum class BuildSystem { Generic, Trivial, Union };

std::string_view buildSystemName(BuildSystem bs);
BuildSystem parseBuildSystem(std::string_view name);

/** One file materialized by the trivial build system. */
struct FileSpec
{
    std::string path;
    std::string mode = "0644";
    std::string content;

    bool operator==(const FileSpec &) const = default;
};

struct BuildArgs
{
    /** Shell command lines for the generic build system; elements are joined verbatim with spaces. */
    std::vector<std::vector<std::string>> commands;
    std::vector<std::string> configureFlags;
    /** Manifest for the trivial build system. */
    std::vector<FileSpec> files;

    bool operator==(const BuildArgs &) const = default;
};

struct PackageRef
{
    std::string name;
    std::optional<std::string> version;

    static PackageRef parse(std::string_view spec);  // "name" or "name@version"
    std::string str() const { return version ? name + "@" + *version : name; }

    bool operator==(const PackageRef &) const = default;
};

struct Package;
using PackagePtr = std::shared_ptr<const Package>;

struct Input
{
    std::string label;
    PackagePtr package;

    bool operator==(const Input & other) const;
};

/**
 * A package is a plain value; the inputs field points directly at other
 * package values, so a package determines its whole build DAG.
 */
struct Package
{
    std::string name;
    std::string version;
    std::optional<Origin> source;
    BuildSystem buildSystem = BuildSystem::Generic;
    std::vector<Input> inputs;
    BuildArgs args;
    std::vector<SearchPathSpec> searchPaths;
    std::string synopsis;
    std::string description;
    std::string homePage;
    std::string license;

    std::string fullName() const { return name + "-" + version; }

    bool operator==(const Package & other) const;
};

/**
 * Component-wise version comparison: split on ".", numeric where both
 * components are numeric, bytewise otherwise.  Returns <0, 0, >0.
 */
int compareVersions(std::string_view a, std::string_view b);

/** Direct and indirect inputs, deduplicated, deterministic DFS order (first occurrence wins). */
std::vector<std::pair<std::string, std::string>> transitiveInputs(const PackagePtr & pkg);
std::vector<PackagePtr> transitiveInputPackages(const PackagePtr & pkg);

/** Field overrides for makeVariant.  Unset fields keep the base's value. */
struct VariantOverrides
{
    std::optional<std::string> name;
    std::optional<std::string> version;
    std::optional<Origin> source;
    std::optional<BuildSystem> buildSystem;
    /** Replaces the whole list. */
    std::optional<std::vector<Input>> inputs;
    /** Placed before the base's inputs (the "inherit and extend" pattern). */
    std::vector<Input> prependInputs;
    std::vector<Input> appendInputs;
    std::optional<BuildArgs> args;
    std::optional<std::vector<SearchPathSpec>> searchPaths;
    std::optional<std::string> synopsis;
    std::optional<std::string> description;
    std::optional<std::string> homePage;
    std::optional<std::string> license;
};

PackagePtr makeVariant(const PackagePtr & base, const VariantOverrides & overrides);

struct RewriteResult
{
    PackagePtr root;
    size_t rewrites = 0;
};

/**
 * Replace every input edge carrying `label`, at any depth, with
 * `replacement`.  Unchanged subgraphs stay shared; with zero matches the
 * original root is returned.
 */
RewriteResult rewriteInputs(
    const PackagePtr & root, const std::string & label, const PackagePtr & replacement);

/**
 * The set of packages loaded from the recipe search path, with
 * inheritance applied and all references resolved.  Immutable after
 * load.
 */
class RecipeSet
{
public:
    /** Later directories shadow earlier ones for identical (name, version). */
    static RecipeSet load(const std::vector<fs::path> & searchDirs);

    /** Resolve a reference; without a version the highest one wins. Throws with suggestions. */
    PackagePtr find(const PackageRef & ref) const;
    std::optional<PackagePtr> maybeFind(const PackageRef & ref) const;

    std::vector<PackagePtr> all() const;
    bool empty() const { return byName.empty(); }

private:
    std::map<std::string, std::map<std::string, PackagePtr>> byName;  // name -> version -> pkg
};

}  // namespace hermit
