#pragma once

#include <map>
#include <set>
#include <string>

#include "hermit/store_path.hh"

namespace hermit {

enum class BuildStatus { Built, Cached, Failed };

struct BuildResult
{
    StorePath path;
    BuildStatus status = BuildStatus::Failed;
    std::string log;
    std::set<StorePath> references;
};

/** Keyed by derivation digest. */
using BuildResults = std::map<std::string, BuildResult>;

struct RealizeOptions
{
    /** Rebuild cached items into a shadow location and compare. */
    bool check = false;
    /** Maximum concurrent builder processes. */
    unsigned jobs = 1;
};

}  // namespace hermit
