#include "hermit/file_lock.hh"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace hermit {

FileLock::FileLock(const fs::path & path, Mode mode)
{
    fd = open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0666);
    if (fd < 0)
        throw Error("cannot open lock file '{}': {}", path.string(), strerror(errno));
    if (flock(fd, mode == Mode::exclusive ? LOCK_EX : LOCK_SH) != 0) {
        int err = errno;
        close(fd);
        fd = -1;
        throw Error("cannot lock '{}': {}", path.string(), strerror(err));
    }
}

FileLock::~FileLock()
{
    unlock();
}

FileLock::FileLock(FileLock && other) noexcept : fd(other.fd)
{
    other.fd = -1;
}

FileLock & FileLock::operator=(FileLock && other) noexcept
{
    if (this != &other) {
        unlock();
        fd = other.fd;
        other.fd = -1;
    }
    return *this;
}

void FileLock::unlock()
{
    if (fd >= 0) {
        close(fd);  // closing releases the flock
        fd = -1;
    }
}

}  // namespace hermit
