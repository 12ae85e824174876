#include "hermit/store.hh"

#include <algorithm>
#include <fstream>

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include "hermit/archive.hh"
#include "hermit/file_lock.hh"
#include "hermit/hash.hh"

namespace hermit {

StoreConfig StoreConfig::forPrefix(const fs::path & prefix)
{
    StoreConfig cfg;
    cfg.logicalRoot = (prefix / "store").string();
    cfg.physicalRoot = prefix / "store";
    cfg.dbPath = prefix / "db";
    cfg.rootsDir = prefix / "gcroots";
    cfg.logsDir = prefix / "logs";
    cfg.tmpDir = prefix / "tmp";
    return cfg;
}

StoreConfig StoreConfig::fromEnv()
{
    std::string root = getEnvOr("HERMIT_STORE", "/hermit/store");
    while (root.size() > 1 && root.back() == '/')
        root.pop_back();
    return forPrefix(fs::path(root).parent_path());
}

Store::Store(StoreConfig config) : cfg(std::move(config))
{
    if (!cfg.logicalRoot.empty() && cfg.logicalRoot.back() == '/')
        throw UsageError("logical store root '{}' has a trailing separator", cfg.logicalRoot);
    ensureLayout();
    std::lock_guard<std::mutex> guard(dbMutex);
    syncLocked();
}

void Store::ensureLayout()
{
    std::error_code ec;
    fs::create_directories(cfg.physicalRoot, ec);
    fs::create_directories(cfg.rootsDir / "auto", ec);
    fs::create_directories(cfg.rootsDir / "tmp", ec);
    fs::create_directories(cfg.logsDir, ec);
    fs::create_directories(cfg.tmpDir, ec);
    fs::create_directories(cfg.dbPath.parent_path(), ec);
    // Read-only stores are fine as long as the pieces already exist.
    if (!fs::is_directory(cfg.physicalRoot))
        throw Error("store directory '{}' does not exist", cfg.physicalRoot.string());
}

std::string Store::computeStoreDigest(std::string_view payload)
{
    auto d = Sha256::hash(payload);
    return base32Encode(d.data(), 20);
}

StorePath Store::makeSourcePath(std::string_view contentDigest, std::string_view name) const
{
    std::string payload = fmt::format("source:{}:{}", contentDigest, name);
    return StorePath(computeStoreDigest(payload), std::string(name));
}

fs::path Store::gcLockPath() const
{
    fs::path p = cfg.dbPath;
    p += ".gc.lock";
    return p;
}

fs::path Store::itemLockPath(const StorePath & path) const
{
    fs::path p = physicalPath(path);
    p += ".lock";
    return p;
}

// ---------------------------------------------------------------------------
// Metadata database.
//
// One line per item:
//   item <rendered-path> <contentDigest> <deriver-or-"-"> <ref-count> <refs...>
// A trailing "ok" line commits everything appended since the previous
// commit; an unterminated tail is discarded on load.

static int64_t fileMtimeNs(const fs::path & p, uint64_t & sizeOut)
{
    struct stat st;
    if (stat(p.c_str(), &st) != 0) {
        sizeOut = 0;
        return -1;
    }
    sizeOut = static_cast<uint64_t>(st.st_size);
    return st.st_mtim.tv_sec * 1000000000LL + st.st_mtim.tv_nsec;
}

void Store::syncLocked()
{
    uint64_t size = 0;
    int64_t mtime = fileMtimeNs(cfg.dbPath, size);
    if (mtime == loadedMtimeNs && size == loadedSize)
        return;

    FileLock lock(fs::path(cfg.dbPath.string() + ".lock"), FileLock::Mode::shared);

    items.clear();
    nextSeq = 1;
    if (fs::exists(cfg.dbPath)) {
        std::string data = readFile(cfg.dbPath);
        std::vector<StoreItemRecord> pending;
        for (auto & line : splitString(data, '\n')) {
            if (line.empty())
                continue;
            if (line == "ok") {
                for (auto & rec : pending) {
                    rec.registeredAt = nextSeq++;
                    items.insert_or_assign(rec.path, std::move(rec));
                }
                pending.clear();
                continue;
            }
            auto fields = splitString(line, ' ');
            if (fields.size() < 5 || fields[0] != "item")
                throw IntegrityError("malformed store DB line: '{}'", line);
            StoreItemRecord rec{
                .path = StorePath::parseRendered(fields[1], cfg.logicalRoot),
                .contentDigest = fields[2],
                .references = {},
                .deriver = fields[3] == "-" ? std::nullopt : std::make_optional(fields[3]),
            };
            size_t refCount = std::stoull(fields[4]);
            if (fields.size() != 5 + refCount)
                throw IntegrityError("store DB line has wrong reference count: '{}'", line);
            for (size_t i = 0; i < refCount; ++i)
                rec.references.insert(StorePath::parseRendered(fields[5 + i], cfg.logicalRoot));
            pending.push_back(std::move(rec));
        }
        // Anything after the last "ok" was a partial write; drop it.
    }
    loadedMtimeNs = fileMtimeNs(cfg.dbPath, loadedSize);
}

std::string Store::renderRecord(const StoreItemRecord & rec) const
{
    std::string line = fmt::format(
        "item {} {} {} {}", renderPath(rec.path), rec.contentDigest,
        rec.deriver ? *rec.deriver : "-", rec.references.size());
    for (const auto & ref : rec.references)
        line += " " + renderPath(ref);
    return line;
}

void Store::appendRecordsLocked(const std::vector<StoreItemRecord> & records)
{
    FileLock lock(fs::path(cfg.dbPath.string() + ".lock"), FileLock::Mode::exclusive);

    std::string chunk;
    for (const auto & rec : records)
        chunk += renderRecord(rec) + "\n";
    chunk += "ok\n";

    int fd = open(cfg.dbPath.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0666);
    if (fd < 0)
        throw Error("cannot open store DB '{}': {}", cfg.dbPath.string(), strerror(errno));
    ssize_t n = write(fd, chunk.data(), chunk.size());
    int err = errno;
    fsync(fd);
    close(fd);
    if (n != static_cast<ssize_t>(chunk.size()))
        throw Error("cannot append to store DB: {}", strerror(err));

    for (auto rec : records) {
        rec.registeredAt = nextSeq++;
        items.insert_or_assign(rec.path, std::move(rec));
    }
    loadedMtimeNs = fileMtimeNs(cfg.dbPath, loadedSize);
}

void Store::rewriteDbLocked()
{
    FileLock lock(fs::path(cfg.dbPath.string() + ".lock"), FileLock::Mode::exclusive);

    std::vector<const StoreItemRecord *> ordered;
    ordered.reserve(items.size());
    for (const auto & [path, rec] : items)
        ordered.push_back(&rec);
    std::sort(ordered.begin(), ordered.end(), [](auto * a, auto * b) {
        return a->registeredAt < b->registeredAt;
    });

    std::string contents;
    for (auto * rec : ordered)
        contents += renderRecord(*rec) + "\n";
    contents += "ok\n";
    writeFileAtomic(cfg.dbPath, contents);
    loadedMtimeNs = fileMtimeNs(cfg.dbPath, loadedSize);
}

// ---------------------------------------------------------------------------
// Item registration and queries.

void Store::registerItem(StoreItemRecord record, std::optional<std::string_view> archiveBytes)
{
    record.references.erase(record.path);  // no self-edges in the reference graph

    FileLock gcShared(gcLockPath(), FileLock::Mode::shared);
    FileLock itemLock(itemLockPath(record.path), FileLock::Mode::exclusive);

    std::lock_guard<std::mutex> guard(dbMutex);
    syncLocked();

    if (auto it = items.find(record.path); it != items.end()) {
        if (it->second.contentDigest != record.contentDigest)
            throw IntegrityError(
                "store path collision at '{}': digest {} already registered, got {}",
                renderPath(record.path), it->second.contentDigest, record.contentDigest);
        return;  // idempotent
    }

    for (const auto & ref : record.references)
        if (!items.contains(ref))
            throw IntegrityError(
                "cannot register '{}': reference '{}' is not a valid item",
                renderPath(record.path), renderPath(ref));

    fs::path physical = physicalPath(record.path);
    if (archiveBytes) {
        fs::path staging = cfg.tmpDir / (record.path.baseName() + fmt::format(".stage{}", getpid()));
        if (fs::exists(staging))
            deletePathRecursive(staging);
        restorePath(*archiveBytes, staging);
        if (fs::exists(fs::symlink_status(physical)))
            deletePathRecursive(physical);
        std::error_code ec;
        fs::rename(staging, physical, ec);
        if (ec) {
            deletePathRecursive(staging);
            throw Error("cannot move item into '{}': {}", physical.string(), ec.message());
        }
    } else if (!fs::exists(fs::symlink_status(physical)))
        throw Error("item '{}' missing on disk at registration", renderPath(record.path));

    appendRecordsLocked({record});
}

void Store::invalidateItem(const StorePath & path)
{
    std::lock_guard<std::mutex> guard(dbMutex);
    syncLocked();
    fs::path physical = physicalPath(path);
    if (fs::exists(fs::symlink_status(physical)))
        deletePathRecursive(physical);
    if (items.erase(path))
        rewriteDbLocked();
}

StorePath Store::addCanonicalArchive(const std::string & name, std::string_view archiveBytes)
{
    if (!StorePath::isValidName(name))
        throw UsageError("invalid store item name '{}'", name);
    std::string contentDigest = sha256Hex(archiveBytes);
    StorePath path = makeSourcePath(contentDigest, name);
    registerItem(
        StoreItemRecord{.path = path, .contentDigest = contentDigest, .references = {}, .deriver = {}},
        archiveBytes);
    return path;
}

StorePath Store::addContent(const fs::path & src, const std::string & name)
{
    return addCanonicalArchive(name, dumpPath(src));
}

StorePath Store::addText(const std::string & name, std::string_view contents)
{
    TreeEntry file{TreeFile{false, std::string(contents)}};
    return addCanonicalArchive(name, archiveSerialize(file));
}

bool Store::isValid(const StorePath & path)
{
    std::lock_guard<std::mutex> guard(dbMutex);
    syncLocked();
    return items.contains(path);
}

StoreItemRecord Store::queryItem(const StorePath & path)
{
    std::lock_guard<std::mutex> guard(dbMutex);
    syncLocked();
    auto it = items.find(path);
    if (it == items.end())
        throw UsageError("path '{}' is not a valid store item", renderPath(path));
    return it->second;
}

std::set<StorePath> Store::references(const StorePath & path)
{
    return queryItem(path).references;
}

std::vector<StoreItemRecord> Store::allItems()
{
    std::lock_guard<std::mutex> guard(dbMutex);
    syncLocked();
    std::vector<StoreItemRecord> res;
    res.reserve(items.size());
    for (const auto & [path, rec] : items)
        res.push_back(rec);
    return res;
}

std::set<StorePath> Store::scanReferencesInBytes(
    std::string_view archiveBytes, const std::set<StorePath> & candidates)
{
    std::set<StorePath> found;
    for (const auto & cand : candidates)
        if (archiveBytes.find(cand.digest()) != std::string_view::npos)
            found.insert(cand);
    return found;
}

std::set<StorePath> Store::scanReferences(
    const StorePath & item, const std::set<StorePath> & candidates)
{
    std::string bytes = dumpPath(physicalPath(item));
    return scanReferencesInBytes(bytes, candidates);
}

std::vector<StorePath> Store::closure(const std::set<StorePath> & roots)
{
    std::lock_guard<std::mutex> guard(dbMutex);
    syncLocked();

    // Collect the reachable set.
    std::map<StorePath, std::set<StorePath>> refs;
    std::vector<StorePath> queue(roots.begin(), roots.end());
    while (!queue.empty()) {
        StorePath p = queue.back();
        queue.pop_back();
        if (refs.contains(p))
            continue;
        auto it = items.find(p);
        if (it == items.end())
            throw IntegrityError("store integrity error: '{}' is not a valid item", renderPath(p));
        std::set<StorePath> r = it->second.references;
        r.erase(p);
        for (const auto & ref : r)
            queue.push_back(ref);
        refs.emplace(std::move(p), std::move(r));
    }

    // Kahn's algorithm, always emitting the smallest ready path, so the
    // order is a deterministic function of the graph.
    std::map<StorePath, std::set<StorePath>> dependents;
    std::set<StorePath> ready;
    for (const auto & [p, r] : refs) {
        if (r.empty())
            ready.insert(p);
        for (const auto & ref : r)
            dependents[ref].insert(p);
    }

    std::vector<StorePath> order;
    std::map<StorePath, size_t> missing;
    for (const auto & [p, r] : refs)
        missing[p] = r.size();
    while (!ready.empty()) {
        StorePath p = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(p);
        for (const auto & dep : dependents[p])
            if (--missing[dep] == 0)
                ready.insert(dep);
    }
    if (order.size() != refs.size())
        throw IntegrityError("reference cycle detected in store DB");
    return order;
}

void Store::verifyItem(const StorePath & path)
{
    StoreItemRecord rec = queryItem(path);
    std::string bytes;
    try {
        bytes = dumpPath(physicalPath(path));
    } catch (Error & e) {
        throw IntegrityError("cannot read item '{}': {}", renderPath(path), e.what());
    }
    std::string got = sha256Hex(bytes);
    if (got != rec.contentDigest)
        throw IntegrityError(
            "item '{}' has been modified: content digest {} does not match registered {}",
            renderPath(path), got, rec.contentDigest);
}

// ---------------------------------------------------------------------------
// GC roots.

fs::path Store::addRoot(const std::string & name, const StorePath & target)
{
    if (name.empty() || name.find('/') != std::string::npos || name[0] == '.')
        throw UsageError("invalid GC root name '{}'", name);
    fs::path link = cfg.rootsDir / name;
    std::string rendered = renderPath(target);
    std::error_code ec;
    fs::path existing = fs::read_symlink(link, ec);
    if (!ec) {
        if (existing.string() == rendered)
            return link;
        throw UsageError(
            "GC root '{}' already exists and points at '{}'", name, existing.string());
    }
    fs::create_symlink(rendered, link);
    return link;
}

void Store::addIndirectRoot(const fs::path & linkPath)
{
    if (!linkPath.is_absolute())
        throw UsageError("indirect GC root '{}' must be absolute", linkPath.string());
    std::string h = sha256Hex(linkPath.string()).substr(0, 24);
    replaceSymlink(linkPath, cfg.rootsDir / "auto" / h);
}

fs::path Store::addTempRoot(const StorePath & target)
{
    uint64_t n;
    {
        std::lock_guard<std::mutex> guard(dbMutex);
        n = tempRootCounter++;
    }
    fs::path link = cfg.rootsDir / "tmp" / fmt::format("{}-{}", getpid(), n);
    replaceSymlink(renderPath(target), link);
    return link;
}

void Store::removeTempRoot(const fs::path & rootFile)
{
    std::error_code ec;
    fs::remove(rootFile, ec);
}

std::set<StorePath> Store::gcRootTargets()
{
    std::set<StorePath> targets;

    auto tryParse = [&](const std::string & rendered) -> std::optional<StorePath> {
        try {
            return StorePath::parseRendered(rendered, cfg.logicalRoot);
        } catch (UsageError &) {
            return std::nullopt;
        }
    };

    for (const auto & entry : fs::directory_iterator(cfg.rootsDir)) {
        if (entry.is_directory())
            continue;
        std::error_code ec;
        fs::path dest = fs::read_symlink(entry.path(), ec);
        if (ec)
            continue;
        if (auto p = tryParse(dest.string()))
            targets.insert(*p);
    }

    // Indirect roots: auto/<hash> -> <link>, where <link> -> store path.
    fs::path autoDir = cfg.rootsDir / "auto";
    if (fs::is_directory(autoDir)) {
        for (const auto & entry : fs::directory_iterator(autoDir)) {
            std::error_code ec;
            fs::path link = fs::read_symlink(entry.path(), ec);
            if (ec)
                continue;
            fs::path dest = fs::read_symlink(link, ec);
            if (ec) {
                // The outside link is gone; the root is stale.
                fs::remove(entry.path(), ec);
                continue;
            }
            if (auto p = tryParse(dest.string()))
                targets.insert(*p);
        }
    }

    // Temp roots: tmp/<pid>-<n>; stale once the pid is gone.
    fs::path tmpDir = cfg.rootsDir / "tmp";
    if (fs::is_directory(tmpDir)) {
        for (const auto & entry : fs::directory_iterator(tmpDir)) {
            std::string fname = entry.path().filename().string();
            pid_t pid = static_cast<pid_t>(strtol(fname.c_str(), nullptr, 10));
            std::error_code ec;
            if (pid > 0 && kill(pid, 0) != 0 && errno == ESRCH) {
                fs::remove(entry.path(), ec);
                continue;
            }
            fs::path dest = fs::read_symlink(entry.path(), ec);
            if (ec)
                continue;
            if (auto p = tryParse(dest.string()))
                targets.insert(*p);
        }
    }

    return targets;
}

// ---------------------------------------------------------------------------
// Garbage collection.

GcReport Store::collectGarbage()
{
    FileLock gcLock(gcLockPath(), FileLock::Mode::exclusive);
    GcReport report;

    std::set<StorePath> liveRoots;
    for (const auto & target : gcRootTargets()) {
        if (isValid(target))
            liveRoots.insert(target);
        else
            report.warnings.push_back(
                fmt::format("GC root target '{}' is not a valid item", renderPath(target)));
    }

    std::vector<StorePath> live = closure(liveRoots);
    std::set<StorePath> liveSet(live.begin(), live.end());

    std::vector<StorePath> victims;
    {
        std::lock_guard<std::mutex> guard(dbMutex);
        syncLocked();
        for (const auto & [path, rec] : items)
            if (!liveSet.contains(path))
                victims.push_back(path);
    }

    // Delete dependents before their dependencies so every observable DB
    // state stays closed under references.
    std::map<StorePath, size_t> victimRank;
    {
        std::set<StorePath> victimSet(victims.begin(), victims.end());
        std::vector<StorePath> order = closure(victimSet);
        for (size_t i = 0; i < order.size(); ++i)
            victimRank[order[i]] = i;
    }
    std::sort(victims.begin(), victims.end(), [&](const StorePath & a, const StorePath & b) {
        return victimRank[a] > victimRank[b];
    });

    // Invalidate in the DB first: a crash between the two steps leaves an
    // unregistered directory (swept below), never a valid item with
    // missing bits.
    if (!victims.empty()) {
        std::lock_guard<std::mutex> guard(dbMutex);
        for (const auto & victim : victims)
            items.erase(victim);
        rewriteDbLocked();
    }
    for (const auto & victim : victims) {
        fs::path physical = physicalPath(victim);
        try {
            FileLock itemLock(itemLockPath(victim), FileLock::Mode::exclusive);
            if (fs::exists(fs::symlink_status(physical)))
                report.freedBytes += deletePathRecursive(physical);
            std::error_code ec;
            fs::remove(itemLockPath(victim), ec);
        } catch (Error & e) {
            report.warnings.push_back(
                fmt::format("while deleting '{}': {}", renderPath(victim), e.what()));
        }
        report.deleted.push_back(victim);
    }

    // Stale on-disk entries that were never registered (crashed builds).
    for (const auto & entry : fs::directory_iterator(cfg.physicalRoot)) {
        std::string base = entry.path().filename().string();
        if (base.ends_with(".lock"))
            continue;
        StorePath parsed = [&]() -> StorePath {
            try {
                return StorePath::parseBaseName(base);
            } catch (UsageError &) {
                return StorePath(std::string(32, '0'), "unregistered");
            }
        }();
        bool registered;
        {
            std::lock_guard<std::mutex> guard(dbMutex);
            registered = items.contains(parsed) && parsed.baseName() == base;
        }
        if (!registered) {
            try {
                report.freedBytes += deletePathRecursive(entry.path());
                report.warnings.push_back(fmt::format(
                    "removed unregistered entry '{}'", entry.path().string()));
            } catch (Error & e) {
                report.warnings.push_back(e.what());
            }
        }
    }

    std::sort(report.deleted.begin(), report.deleted.end());
    return report;
}

std::optional<StorePath> Store::bootstrapPath()
{
    std::error_code ec;
    fs::path dest = fs::read_symlink(cfg.rootsDir / "bootstrap", ec);
    if (ec)
        return std::nullopt;
    StorePath p = StorePath::parseRendered(dest.string(), cfg.logicalRoot);
    if (!isValid(p))
        return std::nullopt;
    return p;
}

}  // namespace hermit
