#pragma once

#include "hermit/util.hh"

namespace hermit {

/**
 * flock(2)-based advisory lock, held for the lifetime of the object.
 * Each instance opens its own descriptor, so two threads of one process
 * contend the same way two processes do.
 */
class FileLock
{
public:
    enum class Mode { shared, exclusive };

    FileLock() = default;
    FileLock(const fs::path & path, Mode mode);
    ~FileLock();

    FileLock(FileLock && other) noexcept;
    FileLock & operator=(FileLock && other) noexcept;
    FileLock(const FileLock &) = delete;
    FileLock & operator=(const FileLock &) = delete;

    void unlock();
    bool held() const { return fd >= 0; }

private:
    int fd = -1;
};

}  // namespace hermit
