#include "hermit/model.hh"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "hermit/hash.hh"

namespace hermit {

using nlohmann::json;

std::string_view buildSystemName(BuildSystem bs)
{
    switch (bs) {
    case BuildSystem::Generic: return "generic";
    case BuildSystem::Trivial: return "trivial";
    case BuildSystem::Union: return "union";
    }
    throw Error("unreachable");
}

BuildSystem parseBuildSystem(std::string_view name)
{
    if (name == "generic")
        return BuildSystem::Generic;
    if (name == "trivial")
        return BuildSystem::Trivial;
    if (name == "union")
        return BuildSystem::Union;
    throw UsageError("unknown build system '{}'", name);
}

PackageRef PackageRef::parse(std::string_view spec)
{
    auto at = spec.find('@');
    if (at == std::string_view::npos)
        return PackageRef{std::string(spec), std::nullopt};
    return PackageRef{std::string(spec.substr(0, at)), std::string(spec.substr(at + 1))};
}

bool Input::operator==(const Input & other) const
{
    if (label != other.label)
        return false;
    if (package == other.package)
        return true;
    return package && other.package && *package == *other.package;
}

bool Package::operator==(const Package & other) const
{
    return name == other.name && version == other.version && source == other.source
        && buildSystem == other.buildSystem && inputs == other.inputs && args == other.args
        && searchPaths == other.searchPaths && synopsis == other.synopsis
        && description == other.description && homePage == other.homePage
        && license == other.license;
}

int compareVersions(std::string_view a, std::string_view b)
{
    auto as = splitString(a, '.');
    auto bs = splitString(b, '.');
    size_t n = std::max(as.size(), bs.size());
    for (size_t i = 0; i < n; ++i) {
        std::string ca = i < as.size() ? as[i] : "";
        std::string cb = i < bs.size() ? bs[i] : "";
        auto numeric = [](const std::string & s) {
            return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
                return c >= '0' && c <= '9';
            });
        };
        if (numeric(ca) && numeric(cb)) {
            unsigned long long va = std::stoull(ca), vb = std::stoull(cb);
            if (va != vb)
                return va < vb ? -1 : 1;
        } else if (ca != cb)
            return ca < cb ? -1 : 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// DAG queries and rewriting.

static void walkInputs(
    const PackagePtr & pkg, std::set<const Package *> & seen,
    std::vector<std::pair<std::string, PackagePtr>> & out)
{
    for (const auto & input : pkg->inputs) {
        if (seen.insert(input.package.get()).second) {
            out.emplace_back(input.label, input.package);
            walkInputs(input.package, seen, out);
        }
    }
}

std::vector<std::pair<std::string, std::string>> transitiveInputs(const PackagePtr & pkg)
{
    std::set<const Package *> seen;
    seen.insert(pkg.get());  // the package itself is excluded
    std::vector<std::pair<std::string, PackagePtr>> found;
    walkInputs(pkg, seen, found);
    std::vector<std::pair<std::string, std::string>> res;
    res.reserve(found.size());
    for (const auto & [label, p] : found)
        res.emplace_back(label, p->fullName());
    return res;
}

std::vector<PackagePtr> transitiveInputPackages(const PackagePtr & pkg)
{
    std::set<const Package *> seen;
    seen.insert(pkg.get());
    std::vector<std::pair<std::string, PackagePtr>> found;
    walkInputs(pkg, seen, found);
    std::vector<PackagePtr> res;
    res.reserve(found.size());
    for (const auto & [label, p] : found)
        res.push_back(p);
    return res;
}

PackagePtr makeVariant(const PackagePtr & base, const VariantOverrides & o)
{
    Package pkg = *base;
    if (o.name)
        pkg.name = *o.name;
    if (o.version)
        pkg.version = *o.version;
    if (o.source)
        pkg.source = *o.source;
    if (o.buildSystem)
        pkg.buildSystem = *o.buildSystem;
    if (o.inputs)
        pkg.inputs = *o.inputs;
    if (!o.prependInputs.empty())
        pkg.inputs.insert(pkg.inputs.begin(), o.prependInputs.begin(), o.prependInputs.end());
    if (!o.appendInputs.empty())
        pkg.inputs.insert(pkg.inputs.end(), o.appendInputs.begin(), o.appendInputs.end());
    if (o.args)
        pkg.args = *o.args;
    if (o.searchPaths)
        pkg.searchPaths = *o.searchPaths;
    if (o.synopsis)
        pkg.synopsis = *o.synopsis;
    if (o.description)
        pkg.description = *o.description;
    if (o.homePage)
        pkg.homePage = *o.homePage;
    if (o.license)
        pkg.license = *o.license;

    auto dup = std::set<std::string>{};
    for (const auto & input : pkg.inputs)
        if (!dup.insert(input.label).second)
            throw UsageError("variant of '{}' has duplicate input label '{}'", base->fullName(),
                             input.label);
    return std::make_shared<const Package>(std::move(pkg));
}

static PackagePtr rewriteNode(
    const PackagePtr & pkg, const std::string & label, const PackagePtr & replacement,
    std::map<const Package *, PackagePtr> & memo, size_t & count)
{
    if (auto it = memo.find(pkg.get()); it != memo.end())
        return it->second;

    bool changed = false;
    std::vector<Input> newInputs;
    newInputs.reserve(pkg->inputs.size());
    for (const auto & input : pkg->inputs) {
        if (input.label == label) {
            ++count;
            newInputs.push_back(Input{input.label, replacement});
            if (input.package != replacement)
                changed = true;
        } else {
            PackagePtr child = rewriteNode(input.package, label, replacement, memo, count);
            if (child != input.package)
                changed = true;
            newInputs.push_back(Input{input.label, child});
        }
    }

    PackagePtr result = pkg;
    if (changed) {
        Package copy = *pkg;
        copy.inputs = std::move(newInputs);
        result = std::make_shared<const Package>(std::move(copy));
    }
    memo.emplace(pkg.get(), result);
    return result;
}

RewriteResult rewriteInputs(
    const PackagePtr & root, const std::string & label, const PackagePtr & replacement)
{
    std::map<const Package *, PackagePtr> memo;
    size_t count = 0;
    PackagePtr newRoot = rewriteNode(root, label, replacement, memo, count);
    return RewriteResult{newRoot, count};
}

// ---------------------------------------------------------------------------
// Recipe loading.

namespace {

struct RawDoc
{
    json body;
    fs::path file;
};

struct Loader
{
    // (name, version) -> doc; later directories/files shadow earlier.
    std::map<std::pair<std::string, std::string>, RawDoc> docs;
    std::map<std::pair<std::string, std::string>, PackagePtr> resolved;
    std::vector<std::pair<std::string, std::string>> stack;  // cycle detection

    static const std::set<std::string> & allowedKeys()
    {
        static const std::set<std::string> keys{
            "name", "version", "source", "build-system", "inputs", "arguments",
            "search-paths", "inherit", "synopsis", "description", "home-page", "license"};
        return keys;
    }

    const RawDoc & findDoc(const std::string & name, const std::optional<std::string> & version)
    {
        if (version) {
            auto it = docs.find({name, *version});
            if (it == docs.end())
                throw UsageError("package '{}@{}' not found in recipe path", name, *version);
            return it->second;
        }
        const RawDoc * best = nullptr;
        std::string bestVersion;
        for (const auto & [key, doc] : docs) {
            if (key.first != name)
                continue;
            if (!best || compareVersions(key.second, bestVersion) > 0) {
                best = &doc;
                bestVersion = key.second;
            }
        }
        if (!best)
            throw UsageError("package '{}' not found in recipe path", name);
        return *best;
    }

    PackagePtr resolve(const std::string & name, const std::string & version);
};

}  // namespace

static std::string jsonDiagnostic(const fs::path & file, const json::exception & e)
{
    return fmt::format("{}: {}", file.string(), e.what());
}

static Origin parseOrigin(const json & j, const fs::path & file)
{
    Origin origin;
    origin.method = j.value("method", "file-fetch");
    if (origin.method != "file-fetch")
        throw UsageError("{}: unsupported origin method '{}'", file.string(), origin.method);
    origin.uri = j.at("uri").get<std::string>();
    origin.sha256 = j.at("sha256").get<std::string>();
    if (origin.sha256.size() != 52 || !isBase32(origin.sha256))
        throw UsageError(
            "{}: origin sha256 '{}' is not a 52-character base32 digest", file.string(),
            origin.sha256);
    // Relative uris are anchored at the recipe file's directory.
    std::string uri = origin.uri;
    if (uri.starts_with("file://"))
        uri = uri.substr(7);
    fs::path p(uri);
    if (!p.is_absolute())
        p = file.parent_path() / p;
    origin.uri = fs::weakly_canonical(p).string();
    return origin;
}

static bool validSearchPathVariable(std::string_view v)
{
    if (v.empty())
        return false;
    if (!((v[0] >= 'A' && v[0] <= 'Z') || v[0] == '_'))
        return false;
    for (char c : v)
        if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'))
            return false;
    return true;
}

PackagePtr Loader::resolve(const std::string & name, const std::string & version)
{
    auto key = std::make_pair(name, version);
    if (auto it = resolved.find(key); it != resolved.end())
        return it->second;

    if (std::find(stack.begin(), stack.end(), key) != stack.end()) {
        std::string cycle;
        for (const auto & [n, v] : stack)
            cycle += fmt::format("{}-{} -> ", n, v);
        throw UsageError("package cycle detected: {}{}-{}", cycle, name, version);
    }
    stack.push_back(key);

    const RawDoc & doc = docs.at(key);
    const json & body = doc.body;

    // Merge with the inherited parent, if any: a key present here
    // overrides, anything else is copied.
    PackagePtr parent;
    if (body.contains("inherit")) {
        const json & inh = body.at("inherit");
        std::string pname = inh.at("name").get<std::string>();
        std::optional<std::string> pversion;
        if (inh.contains("version"))
            pversion = inh.at("version").get<std::string>();
        const RawDoc & pdoc = findDoc(pname, pversion);
        parent = resolve(
            pdoc.body.at("name").get<std::string>(), pdoc.body.at("version").get<std::string>());
    }

    Package pkg;
    if (parent)
        pkg = *parent;

    try {
        for (const auto & [k, v] : body.items())
            if (!allowedKeys().contains(k))
                throw UsageError("{}: unknown recipe key '{}'", doc.file.string(), k);

        pkg.name = body.at("name").get<std::string>();
        if (body.contains("version"))
            pkg.version = body.at("version").get<std::string>();
        else if (!parent)
            throw UsageError("{}: package '{}' has no version", doc.file.string(), pkg.name);

        if (body.contains("source"))
            pkg.source = parseOrigin(body.at("source"), doc.file);
        if (body.contains("build-system"))
            pkg.buildSystem = parseBuildSystem(body.at("build-system").get<std::string>());
        else if (!parent)
            throw UsageError(
                "{}: package '{}' has no build-system", doc.file.string(), pkg.fullName());

        if (body.contains("inputs")) {
            pkg.inputs.clear();
            std::set<std::string> labels;
            for (const json & entry : body.at("inputs")) {
                if (!entry.is_array() || entry.size() != 2)
                    throw UsageError(
                        "{}: inputs entries must be [label, ref] pairs", doc.file.string());
                std::string label = entry[0].get<std::string>();
                if (!labels.insert(label).second)
                    throw UsageError(
                        "{}: duplicate input label '{}' in '{}'", doc.file.string(), label,
                        pkg.fullName());
                const json & refj = entry[1];
                std::string rname = refj.at("name").get<std::string>();
                std::optional<std::string> rversion;
                if (refj.contains("version"))
                    rversion = refj.at("version").get<std::string>();
                const RawDoc & rdoc = findDoc(rname, rversion);
                PackagePtr dep = resolve(
                    rdoc.body.at("name").get<std::string>(),
                    rdoc.body.at("version").get<std::string>());
                pkg.inputs.push_back(Input{std::move(label), std::move(dep)});
            }
        }

        if (body.contains("arguments")) {
            const json & args = body.at("arguments");
            pkg.args = BuildArgs{};
            for (const auto & [k, v] : args.items()) {
                if (k == "commands") {
                    for (const json & cmd : v) {
                        std::vector<std::string> argv;
                        for (const json & word : cmd)
                            argv.push_back(word.get<std::string>());
                        pkg.args.commands.push_back(std::move(argv));
                    }
                } else if (k == "configure-flags") {
                    for (const json & flag : v)
                        pkg.args.configureFlags.push_back(flag.get<std::string>());
                } else if (k == "files") {
                    for (const json & f : v) {
                        FileSpec spec;
                        spec.path = f.at("path").get<std::string>();
                        spec.mode = f.value("mode", "0644");
                        spec.content = f.at("content").get<std::string>();
                        pkg.args.files.push_back(std::move(spec));
                    }
                } else
                    throw UsageError("{}: unknown arguments key '{}'", doc.file.string(), k);
            }
        }

        if (body.contains("search-paths")) {
            pkg.searchPaths.clear();
            for (const json & spj : body.at("search-paths")) {
                SearchPathSpec spec;
                spec.variable = spj.at("variable").get<std::string>();
                spec.subdirectory = spj.at("subdirectory").get<std::string>();
                spec.separator = spj.value("separator", ":");
                if (!validSearchPathVariable(spec.variable))
                    throw UsageError(
                        "{}: invalid search path variable '{}'", doc.file.string(), spec.variable);
                pkg.searchPaths.push_back(std::move(spec));
            }
        }

        if (body.contains("synopsis"))
            pkg.synopsis = body.at("synopsis").get<std::string>();
        if (body.contains("description"))
            pkg.description = body.at("description").get<std::string>();
        if (body.contains("home-page"))
            pkg.homePage = body.at("home-page").get<std::string>();
        if (body.contains("license"))
            pkg.license = body.at("license").get<std::string>();
    } catch (json::exception & e) {
        throw UsageError("{}", jsonDiagnostic(doc.file, e));
    }

    stack.pop_back();
    PackagePtr ptr = std::make_shared<const Package>(std::move(pkg));
    resolved.emplace(key, ptr);
    return ptr;
}

RecipeSet RecipeSet::load(const std::vector<fs::path> & searchDirs)
{
    Loader loader;

    for (const auto & dir : searchDirs) {
        if (!fs::is_directory(dir))
            throw UsageError("recipe directory '{}' does not exist", dir.string());
        std::vector<fs::path> files;
        for (const auto & entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto & file : files) {
            std::string text = readFile(file);
            json parsed;
            try {
                parsed = json::parse(text);
            } catch (json::parse_error & e) {
                // Turn the byte offset into a line number for the diagnostic.
                size_t line = 1 + std::count(text.begin(), text.begin() + std::min(e.byte, text.size()), '\n');
                throw UsageError("{}:{}: {}", file.string(), line, e.what());
            }
            try {
                for (const json & pkgj : parsed.at("packages")) {
                    std::string name = pkgj.at("name").get<std::string>();
                    std::string version;
                    if (pkgj.contains("version"))
                        version = pkgj.at("version").get<std::string>();
                    else if (pkgj.contains("inherit")) {
                        // Version comes from the parent; key the doc once known.
                        // Defer by storing with a placeholder resolved later.
                        version = "";
                    }
                    loader.docs.insert_or_assign(
                        std::make_pair(name, version), RawDoc{pkgj, file});
                }
            } catch (json::exception & e) {
                throw UsageError("{}", jsonDiagnostic(file, e));
            }
        }
    }

    // Docs whose version comes from a parent get their real key once the
    // parent is known.
    std::vector<std::pair<std::string, std::string>> placeholders;
    for (const auto & [key, doc] : loader.docs)
        if (key.second.empty())
            placeholders.push_back(key);
    for (const auto & key : placeholders) {
        RawDoc doc = loader.docs.at(key);
        const json & inh = doc.body.at("inherit");
        std::string pname = inh.at("name").get<std::string>();
        std::optional<std::string> pversion;
        if (inh.contains("version"))
            pversion = inh.at("version").get<std::string>();
        const RawDoc & pdoc = loader.findDoc(pname, pversion);
        std::string version = pdoc.body.at("version").get<std::string>();
        loader.docs.erase(key);
        loader.docs.insert_or_assign({key.first, version}, std::move(doc));
    }

    RecipeSet set;
    for (const auto & [key, doc] : loader.docs) {
        PackagePtr pkg = loader.resolve(key.first, key.second);
        set.byName[pkg->name][pkg->version] = pkg;
    }
    return set;
}

static size_t editDistance(std::string_view a, std::string_view b)
{
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j)
        prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::optional<PackagePtr> RecipeSet::maybeFind(const PackageRef & ref) const
{
    auto it = byName.find(ref.name);
    if (it == byName.end())
        return std::nullopt;
    if (ref.version) {
        auto vit = it->second.find(*ref.version);
        if (vit == it->second.end())
            return std::nullopt;
        return vit->second;
    }
    const PackagePtr * best = nullptr;
    std::string bestVersion;
    for (const auto & [version, pkg] : it->second) {
        if (!best || compareVersions(version, bestVersion) > 0) {
            best = &pkg;
            bestVersion = version;
        }
    }
    return best ? std::optional<PackagePtr>(*best) : std::nullopt;
}

PackagePtr RecipeSet::find(const PackageRef & ref) const
{
    if (auto pkg = maybeFind(ref))
        return *pkg;

    std::vector<std::pair<size_t, std::string>> scored;
    for (const auto & [name, versions] : byName) {
        size_t d = editDistance(ref.name, name);
        if (d <= 2)
            scored.emplace_back(d, name);
    }
    std::sort(scored.begin(), scored.end());
    std::string hint;
    if (!scored.empty()) {
        hint = "; did you mean";
        for (size_t i = 0; i < scored.size() && i < 3; ++i)
            hint += fmt::format(" '{}'", scored[i].second);
        hint += "?";
    }
    throw UsageError("unknown package '{}'{}", ref.str(), hint);
}

std::vector<PackagePtr> RecipeSet::all() const
{
    std::vector<PackagePtr> res;
    for (const auto & [name, versions] : byName)
        for (const auto & [version, pkg] : versions)
            res.push_back(pkg);
    return res;
}

}  // namespace hermit
