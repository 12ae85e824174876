#include "hermit/store_path.hh"

#include "hermit/hash.hh"
#include "hermit/util.hh"

namespace hermit {

bool StorePath::isValidName(std::string_view name)
{
    if (name.empty() || name[0] == '.' || name[0] == '-')
        return false;
    for (char c : name) {
        bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')
            || c == '+' || c == '.' || c == '_' || c == '?' || c == '=' || c == '-';
        if (!ok)
            return false;
    }
    return true;
}

StorePath::StorePath(std::string digest, std::string name)
    : digest_(std::move(digest))
    , name_(std::move(name))
{
    if (digest_.size() != digestLen || !isBase32(digest_))
        throw UsageError("invalid store path digest '{}'", digest_);
    if (!isValidName(name_))
        throw UsageError("invalid store path name '{}'", name_);
}

StorePath StorePath::parseBaseName(std::string_view baseName)
{
    if (baseName.size() < digestLen + 2 || baseName[digestLen] != '-')
        throw UsageError("malformed store path '{}'", baseName);
    return StorePath(
        std::string(baseName.substr(0, digestLen)), std::string(baseName.substr(digestLen + 1)));
}

StorePath StorePath::parseRendered(std::string_view rendered, std::string_view logicalRoot)
{
    std::string prefix = std::string(logicalRoot) + "/";
    if (!rendered.starts_with(prefix))
        throw UsageError("path '{}' is not in the store '{}'", rendered, logicalRoot);
    auto rest = rendered.substr(prefix.size());
    if (rest.find('/') != std::string_view::npos)
        throw UsageError("path '{}' names something inside a store item", rendered);
    return parseBaseName(rest);
}

std::string StorePath::render(std::string_view logicalRoot) const
{
    return std::string(logicalRoot) + "/" + baseName();
}

}  // namespace hermit
