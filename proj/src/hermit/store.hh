#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "hermit/store_path.hh"
#include "hermit/util.hh"

namespace hermit {

struct StoreConfig
{
    /** Root used inside hashes and item contents; never has a trailing separator. */
    std::string logicalRoot = "/hermit/store";
    /** Directory where items actually live.  Builds require physical == logical. */
    fs::path physicalRoot = "/hermit/store";
    /** Metadata database file. */
    fs::path dbPath = "/hermit/db";
    /** GC root symlinks (plus auto/ and tmp/ subdirectories). */
    fs::path rootsDir = "/hermit/gcroots";
    /** Build logs. */
    fs::path logsDir = "/hermit/logs";
    /** Scratch space for builds and staging. */
    fs::path tmpDir = "/hermit/tmp";

    /** Standard layout: store db gcroots logs tmp under one prefix. */
    static StoreConfig forPrefix(const fs::path & prefix);

    /** Layout from environment (HERMIT_STORE overrides the logical root). */
    static StoreConfig fromEnv();

    bool buildsAllowed() const { return physicalRoot.string() == logicalRoot; }
};

struct StoreItemRecord
{
    StorePath path;
    /** 64-hex-char SHA-256 of the item's canonical archive bytes. */
    std::string contentDigest;
    std::set<StorePath> references;
    /** Digest of the derivation that built this item, if any. */
    std::optional<std::string> deriver;
    /** Monotone registration sequence number. */
    uint64_t registeredAt = 0;
};

struct GcReport
{
    std::vector<StorePath> deleted;
    uint64_t freedBytes = 0;
    std::vector<std::string> warnings;
};

/**
 * The content-addressed store: hash-named immutable items, a reference
 * graph, GC roots, and garbage collection.
 *
 * Lock discipline (outer to inner): gc lock -> in-process mutex ->
 * db lock -> per-item locks.  Registration and GC take the db lock
 * exclusively; reads take it shared.  GC takes the gc lock exclusively
 * while builds and registrations hold it shared.
 */
class Store
{
public:
    explicit Store(StoreConfig config);

    const StoreConfig & config() const { return cfg; }
    const std::string & logicalRoot() const { return cfg.logicalRoot; }

    fs::path physicalPath(const StorePath & path) const
    {
        return cfg.physicalRoot / path.baseName();
    }
    std::string renderPath(const StorePath & path) const { return path.render(cfg.logicalRoot); }

    /** base32 of the first 20 bytes of SHA-256 of the payload. */
    static std::string computeStoreDigest(std::string_view payload);

    /** Store path a source item with the given canonical-archive digest would get. */
    StorePath makeSourcePath(std::string_view contentDigest, std::string_view name) const;

    /** Add a filesystem object; idempotent. */
    StorePath addContent(const fs::path & src, const std::string & name);

    /** Add pre-serialized canonical archive bytes. */
    StorePath addCanonicalArchive(const std::string & name, std::string_view archiveBytes);

    /** Add a plain non-executable file with the given contents. */
    StorePath addText(const std::string & name, std::string_view contents);

    bool isValid(const StorePath & path);
    StoreItemRecord queryItem(const StorePath & path);
    std::set<StorePath> references(const StorePath & path);
    std::vector<StoreItemRecord> allItems();

    /**
     * Every candidate whose digest occurs as a byte substring of the
     * item's canonical archive bytes.
     */
    std::set<StorePath> scanReferences(const StorePath & item, const std::set<StorePath> & candidates);
    static std::set<StorePath> scanReferencesInBytes(
        std::string_view archiveBytes, const std::set<StorePath> & candidates);

    /**
     * All items reachable from the roots via recorded references, in
     * topological order (dependencies first), ties broken by rendered
     * byte order.
     */
    std::vector<StorePath> closure(const std::set<StorePath> & roots);

    /** Recompute the content digest from disk and compare with the DB. */
    void verifyItem(const StorePath & path);

    /** Named GC root: a symlink in rootsDir pointing at the item. Returns the symlink path. */
    fs::path addRoot(const std::string & name, const StorePath & target);

    /**
     * Indirect root: rootsDir/auto/<hash> -> linkPath, where linkPath is
     * itself a symlink to a store path (profile generation links).
     * Deleting linkPath makes the target collectable.
     */
    void addIndirectRoot(const fs::path & linkPath);

    /** Process-lifetime root; removed by removeTempRoot or pruned once the pid dies. */
    fs::path addTempRoot(const StorePath & target);
    void removeTempRoot(const fs::path & rootFile);

    /** All live root targets (stale indirect/temp roots pruned as a side effect). */
    std::set<StorePath> gcRootTargets();

    GcReport collectGarbage();

    /** The bootstrap seed item (registered under the root name "bootstrap"). */
    std::optional<StorePath> bootstrapPath();

    /**
     * Register an item record.  If archiveBytes is given the item is
     * materialized from them (staged then renamed); otherwise the tree
     * must already be on disk at its physical path.  Idempotent for an
     * identical valid item; a different content digest for the same
     * path is a fatal collision.
     */
    void registerItem(StoreItemRecord record, std::optional<std::string_view> archiveBytes);

    /** Drop one item (disk + record). Caller must know it is unreferenced. */
    void invalidateItem(const StorePath & path);

    fs::path gcLockPath() const;
    fs::path itemLockPath(const StorePath & path) const;

private:
    void ensureLayout();
    /** Reload the DB if the file changed under us. Caller holds dbMutex. */
    void syncLocked();
    void appendRecordsLocked(const std::vector<StoreItemRecord> & records);
    void rewriteDbLocked();
    std::string renderRecord(const StoreItemRecord & rec) const;

    StoreConfig cfg;
    std::mutex dbMutex;
    std::map<StorePath, StoreItemRecord> items;
    uint64_t nextSeq = 1;
    // Identity of the DB file contents we last loaded.
    int64_t loadedMtimeNs = -1;
    uint64_t loadedSize = 0;
    uint64_t tempRootCounter = 0;
};

}  // namespace hermit
