#pragma once

#include <atomic>
#include <chrono>

#include "amvl/errors.hpp"

namespace amvl {

enum class ClockMode { Virtual, Wall };

// Timestamp source for all decay and lifecycle math. Virtual mode advances
// only through explicit ticks so two same-seed runs observe identical
// timestamps; wall mode is for service deployments. Wall-clock nanoseconds
// for latency telemetry come from steady_clock directly, never from here.
class Clock {
public:
    explicit Clock(ClockMode mode = ClockMode::Virtual)
        : mode_(mode), virtual_now_(0.0), wall_epoch_(std::chrono::steady_clock::now()) {}

    ClockMode mode() const { return mode_; }

    double now() const {
        if (mode_ == ClockMode::Virtual) {
            return virtual_now_.load(std::memory_order_acquire);
        }
        auto dt = std::chrono::steady_clock::now() - wall_epoch_;
        return std::chrono::duration<double>(dt).count();
    }

    // Virtual mode only; monotone nondecreasing.
    void advance_to(double t) {
        if (mode_ != ClockMode::Virtual) {
            throw Error(ErrorCode::InvalidArgument, "advance_to on a wall clock");
        }
        double cur = virtual_now_.load(std::memory_order_acquire);
        if (t < cur) {
            throw Error(ErrorCode::ClockRegression, "virtual clock moved backwards");
        }
        virtual_now_.store(t, std::memory_order_release);
    }

    void advance_by(double dt) { advance_to(now() + dt); }

private:
    ClockMode mode_;
    std::atomic<double> virtual_now_;
    std::chrono::steady_clock::time_point wall_epoch_;
};

// Wall-clock microseconds since an arbitrary steady epoch; latency telemetry only.
inline int64_t wall_micros() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace amvl
