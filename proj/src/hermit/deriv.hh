#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hermit/model.hh"
#include "hermit/store_path.hh"

namespace hermit {

class StoreApi;

enum class BuilderKind { Fetch, WriteFiles, Union, Exec };

std::string_view builderKindName(BuilderKind k);
BuilderKind parseBuilderKind(std::string_view name);

/**
 * The low-level build IR packages compile to.  A derivation is a pure
 * description: builder + args + env + inputs; its output path is a
 * function of everything except the output path itself.
 */
struct Derivation
{
    std::string name;  // "name-version"
    std::string system;
    BuilderKind builder = BuilderKind::Exec;
    std::vector<std::string> args;
    std::map<std::string, std::string> env;  // sorted, unique keys
    /** (derivation digest, rendered output path), sorted. */
    std::vector<std::pair<std::string, std::string>> inputDrvs;
    /** Rendered store paths of non-derivation inputs, sorted. */
    std::vector<std::string> inputSrcs;
    /** 52-char base32 SHA-256 the output must hash to; present iff builder is Fetch. */
    std::optional<std::string> fixedOutput;

    bool operator==(const Derivation &) const = default;
};

/**
 * Canonical text form:
 *   Drv(name=…;system=…;builder=…;args=[…];env=[k=v,…];
 *       inputDrvs=[digest:path,…];inputSrcs=[…];fixed=sha256:digest or -)
 * Every value is percent-encoded; the output path is not included.
 */
std::string serializeDerivation(const Derivation & drv);
Derivation parseDerivation(std::string_view text);

/**
 * Digest used to refer to a derivation from inputDrvs and deriver
 * fields.  Fixed-output derivations hash as their declared output
 * identity so that e.g. a changed fetch uri does not ripple upward.
 */
std::string derivationDigest(const Derivation & drv);

StorePath derivationOutputPath(const Derivation & drv);

struct DerivationGraph
{
    std::map<std::string, Derivation> nodes;  // derivation digest -> derivation
    std::string root;

    const Derivation & rootDrv() const { return nodes.at(root); }

    /** Dependencies before dependents; deterministic. */
    std::vector<std::string> topoOrder() const;
};

struct CompileContext
{
    StoreApi & store;
    std::string system;
};

/**
 * Lower a package DAG to derivations.  Serialized derivations are also
 * added to the store as "<name>.drv" items for later inspection.
 */
DerivationGraph compilePackage(CompileContext & ctx, const PackagePtr & pkg);

/**
 * A union derivation over the given members' outputs (for profile
 * generations and ephemeral environments).  `manifestJson`, when given,
 * is written to <out>/manifest.json by the builder.  With
 * `includeBootstrap` the bootstrap seed item becomes a member too.
 */
DerivationGraph compileUnion(
    CompileContext & ctx, const std::string & name, const std::string & version,
    const std::vector<PackagePtr> & members, bool includeBootstrap,
    const std::optional<std::string> & manifestJson);

std::string defaultSystem();

}  // namespace hermit
