#include "hermit/archive.hh"

#include <fstream>

#include <fcntl.h>
#include <sys/stat.h>
#include <sys/time.h>
#include <unistd.h>

namespace hermit {

static void putU64(std::string & out, uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out += static_cast<char>((v >> (8 * i)) & 0xff);
}

namespace {

class Reader
{
public:
    explicit Reader(std::string_view data) : data_(data) {}

    uint64_t u64()
    {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    char byte()
    {
        need(1);
        return data_[pos_++];
    }

    std::string_view bytes(uint64_t n)
    {
        need(n);
        auto v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }

    bool atEnd() const { return pos_ == data_.size(); }

private:
    void need(uint64_t n)
    {
        if (n > data_.size() - pos_)
            throw Error("truncated archive");
    }

    std::string_view data_;
    size_t pos_ = 0;
};

}  // namespace

static void serializeObject(std::string & out, const TreeEntry & e)
{
    std::visit(
        [&](const auto & node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, TreeFile>) {
                out += 'F';
                out += node.executable ? '\1' : '\0';
                putU64(out, node.contents.size());
                out += node.contents;
            } else if constexpr (std::is_same_v<T, TreeSymlink>) {
                out += 'S';
                putU64(out, node.target.size());
                out += node.target;
            } else {
                out += 'D';
                putU64(out, node.entries.size());
                // std::map iterates in bytewise key order already.
                for (const auto & [name, child] : node.entries) {
                    putU64(out, name.size());
                    out += name;
                    serializeObject(out, child);
                }
            }
        },
        e.node);
}

std::string archiveSerialize(const TreeEntry & tree)
{
    std::string out(kArchiveMagic);
    serializeObject(out, tree);
    return out;
}

static TreeEntry parseObject(Reader & r)
{
    char tag = r.byte();
    switch (tag) {
    case 'F': {
        char exec = r.byte();
        if (exec != 0 && exec != 1)
            throw Error("archive: bad exec flag {}", static_cast<int>(exec));
        uint64_t len = r.u64();
        return TreeEntry{TreeFile{exec == 1, std::string(r.bytes(len))}};
    }
    case 'S': {
        uint64_t len = r.u64();
        return TreeEntry{TreeSymlink{std::string(r.bytes(len))}};
    }
    case 'D': {
        uint64_t count = r.u64();
        TreeDir dir;
        std::string prev;
        for (uint64_t i = 0; i < count; ++i) {
            uint64_t nameLen = r.u64();
            std::string name(r.bytes(nameLen));
            if (name.empty() || name == "." || name == ".."
                || name.find('/') != std::string::npos)
                throw Error("archive: invalid entry name '{}'", name);
            if (i > 0 && !(prev < name))
                throw Error("archive: entries not sorted ('{}' then '{}')", prev, name);
            dir.entries.emplace(name, parseObject(r));
            prev = std::move(name);
        }
        return TreeEntry{std::move(dir)};
    }
    default:
        throw Error("archive: unknown object tag '{}'", tag);
    }
}

TreeEntry archiveParse(std::string_view bytes)
{
    if (!bytes.starts_with(kArchiveMagic))
        throw Error("not a canonical archive (bad magic)");
    Reader r(bytes.substr(kArchiveMagic.size()));
    TreeEntry e = parseObject(r);
    if (!r.atEnd())
        throw Error("archive: trailing bytes after object");
    return e;
}

static void dumpObject(std::string & out, const fs::path & path)
{
    struct stat st;
    if (lstat(path.c_str(), &st) != 0)
        throw Error("cannot stat '{}': {}", path.string(), strerror(errno));

    if (S_ISREG(st.st_mode)) {
        out += 'F';
        out += (st.st_mode & S_IXUSR) ? '\1' : '\0';
        std::string contents = readFile(path);
        putU64(out, contents.size());
        out += contents;
    } else if (S_ISLNK(st.st_mode)) {
        std::error_code ec;
        fs::path target = fs::read_symlink(path, ec);
        if (ec)
            throw Error("cannot read symlink '{}': {}", path.string(), ec.message());
        out += 'S';
        putU64(out, target.string().size());
        out += target.string();
    } else if (S_ISDIR(st.st_mode)) {
        std::map<std::string, fs::path> entries;
        for (const auto & entry : fs::directory_iterator(path))
            entries.emplace(entry.path().filename().string(), entry.path());
        out += 'D';
        putU64(out, entries.size());
        for (const auto & [name, child] : entries) {
            putU64(out, name.size());
            out += name;
            dumpObject(out, child);
        }
    } else {
        throw Error("'{}' has unsupported file type", path.string());
    }
}

std::string dumpPath(const fs::path & path)
{
    std::string out(kArchiveMagic);
    dumpObject(out, path);
    return out;
}

static void setCanonicalMeta(const fs::path & path, bool executable, bool isSymlink)
{
    if (!isSymlink && chmod(path.c_str(), executable ? 0555 : 0444) != 0)
        throw Error("cannot chmod '{}': {}", path.string(), strerror(errno));
    struct timespec times[2];
    times[0].tv_sec = 1;
    times[0].tv_nsec = 0;
    times[1] = times[0];
    if (utimensat(AT_FDCWD, path.c_str(), times, AT_SYMLINK_NOFOLLOW) != 0)
        throw Error("cannot set times on '{}': {}", path.string(), strerror(errno));
}

void restoreTree(const TreeEntry & tree, const fs::path & dest)
{
    std::visit(
        [&](const auto & node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, TreeFile>) {
                writeFile(dest, node.contents);
                setCanonicalMeta(dest, node.executable, false);
            } else if constexpr (std::is_same_v<T, TreeSymlink>) {
                fs::create_symlink(node.target, dest);
                setCanonicalMeta(dest, false, true);
            } else {
                fs::create_directory(dest);
                for (const auto & [name, child] : node.entries)
                    restoreTree(child, dest / name);
                setCanonicalMeta(dest, true, false);
            }
        },
        tree.node);
}

void restorePath(std::string_view bytes, const fs::path & dest)
{
    restoreTree(archiveParse(bytes), dest);
}

static std::optional<std::string> diffEntries(
    const std::string & prefix, const TreeEntry & a, const TreeEntry & b)
{
    if (a.node.index() != b.node.index())
        return prefix.empty() ? "." : prefix;
    if (auto da = std::get_if<TreeDir>(&a.node)) {
        const auto & db = std::get<TreeDir>(b.node);
        auto ia = da->entries.begin();
        auto ib = db.entries.begin();
        while (ia != da->entries.end() || ib != db.entries.end()) {
            if (ia == da->entries.end() || ib == db.entries.end() || ia->first != ib->first) {
                const std::string & name =
                    ia == da->entries.end() ? ib->first
                    : ib == db.entries.end() ? ia->first
                                             : std::min(ia->first, ib->first);
                return prefix.empty() ? name : prefix + "/" + name;
            }
            if (auto d = diffEntries(
                    prefix.empty() ? ia->first : prefix + "/" + ia->first, ia->second, ib->second))
                return d;
            ++ia;
            ++ib;
        }
        return std::nullopt;
    }
    if (a == b)
        return std::nullopt;
    return prefix.empty() ? "." : prefix;
}

std::optional<std::string> archiveFirstDifference(std::string_view a, std::string_view b)
{
    if (a == b)
        return std::nullopt;
    TreeEntry ta = archiveParse(a);
    TreeEntry tb = archiveParse(b);
    auto d = diffEntries("", ta, tb);
    // Byte difference without a structural one cannot happen for valid
    // archives, but report something rather than nothing.
    return d ? d : std::optional<std::string>(".");
}

}  // namespace hermit
