#include "hermit/util.hh"

#include <cstdlib>
#include <fstream>

#include <sys/stat.h>
#include <unistd.h>

namespace hermit {

std::string readFile(const fs::path & path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '{}' for reading", path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw Error("error reading '{}'", path.string());
    return data;
}

void writeFile(const fs::path & path, std::string_view contents)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot open '{}' for writing", path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out)
        throw Error("error writing '{}'", path.string());
}

void writeFileAtomic(const fs::path & path, std::string_view contents)
{
    fs::path tmp = path;
    tmp += fmt::format(".tmp{}", getpid());
    writeFile(tmp, contents);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot rename '{}' to '{}': {}", tmp.string(), path.string(), ec.message());
    }
}

void replaceSymlink(const fs::path & target, const fs::path & link)
{
    fs::path tmp = link;
    tmp += fmt::format(".tmp{}", getpid());
    std::error_code ec;
    fs::remove(tmp, ec);
    fs::create_symlink(target, tmp);
    fs::rename(tmp, link, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot rename symlink '{}' into place: {}", link.string(), ec.message());
    }
}

static uint64_t deleteRecurse(const fs::path & path)
{
    struct stat st;
    if (lstat(path.c_str(), &st) != 0) {
        if (errno == ENOENT)
            return 0;
        throw Error("cannot stat '{}': {}", path.string(), strerror(errno));
    }

    uint64_t freed = 0;
    if (S_ISDIR(st.st_mode)) {
        // Store items are read-only; make the directory writable so we
        // can unlink its entries.
        if ((st.st_mode & S_IWUSR) == 0)
            chmod(path.c_str(), st.st_mode | S_IWUSR);
        for (const auto & entry : fs::directory_iterator(path))
            freed += deleteRecurse(entry.path());
        if (rmdir(path.c_str()) != 0)
            throw Error("cannot remove directory '{}': {}", path.string(), strerror(errno));
    } else {
        if (S_ISREG(st.st_mode))
            freed += static_cast<uint64_t>(st.st_size);
        if (unlink(path.c_str()) != 0)
            throw Error("cannot unlink '{}': {}", path.string(), strerror(errno));
    }
    return freed;
}

uint64_t deletePathRecursive(const fs::path & path)
{
    return deleteRecurse(path);
}

std::vector<std::string> splitString(std::string_view s, char sep)
{
    std::vector<std::string> res;
    size_t pos = 0;
    while (true) {
        size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            res.emplace_back(s.substr(pos));
            return res;
        }
        res.emplace_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
}

std::string joinStrings(const std::vector<std::string> & parts, std::string_view sep)
{
    std::string res;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i)
            res += sep;
        res += parts[i];
    }
    return res;
}

static bool needsEscape(unsigned char c)
{
    return c < 0x20 || c == '%' || c == ';' || c == ',' || c == '=' || c == '[' || c == ']'
        || c == '(' || c == ')';
}

std::string percentEncode(std::string_view s)
{
    static const char hex[] = "0123456789ABCDEF";
    std::string res;
    res.reserve(s.size());
    for (unsigned char c : s) {
        if (needsEscape(c)) {
            res += '%';
            res += hex[c >> 4];
            res += hex[c & 0xf];
        } else
            res += static_cast<char>(c);
    }
    return res;
}

static int hexDigit(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    return -1;
}

std::string percentDecode(std::string_view s)
{
    std::string res;
    res.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%') {
            if (i + 2 >= s.size())
                throw Error("truncated percent escape in '{}'", s);
            int hi = hexDigit(s[i + 1]), lo = hexDigit(s[i + 2]);
            if (hi < 0 || lo < 0)
                throw Error("malformed percent escape in '{}'", s);
            res += static_cast<char>(hi * 16 + lo);
            i += 2;
        } else
            res += s[i];
    }
    return res;
}

std::string getEnvOr(const char * var, std::string_view dflt)
{
    const char * v = std::getenv(var);
    return v ? std::string(v) : std::string(dflt);
}

fs::path homeDir()
{
    const char * h = std::getenv("HOME");
    if (!h || !*h)
        throw Error("HOME is not set");
    return fs::path(h);
}

}  // namespace hermit
