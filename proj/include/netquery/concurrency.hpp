// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstddef>
#include <mutex>

namespace netquery {

/// Counting limiter for in-flight work (provider requests, sandbox processes).
/// The capacity is a runtime value, which std::counting_semaphore does not allow.
class SlotLimiter {
public:
    explicit SlotLimiter(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    SlotLimiter(const SlotLimiter&) = delete;
    SlotLimiter& operator=(const SlotLimiter&) = delete;

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return in_use_ < capacity_; });
        ++in_use_;
    }

    bool try_acquire() {
        std::lock_guard lock(mutex_);
        if (in_use_ >= capacity_)
            return false;
        ++in_use_;
        return true;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            --in_use_;
        }
        cv_.notify_one();
    }

    std::size_t capacity() const noexcept { return capacity_; }

    std::size_t in_use() const {
        std::lock_guard lock(mutex_);
        return in_use_;
    }

    class Slot {
    public:
        explicit Slot(SlotLimiter& limiter) : limiter_(&limiter) { limiter_->acquire(); }
        ~Slot() { limiter_->release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        SlotLimiter* limiter_;
    };

private:
    std::size_t capacity_;
    std::size_t in_use_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
};

} // namespace netquery
