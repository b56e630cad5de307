#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace delaysim {

namespace detail {

inline bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace detail

/// Uniform grid on [-delay, horizon] with step dt = delay/N = horizon/M.
///
/// Only the integers (N, M) and the exact endpoints (delay, horizon) are
/// stored; dt is always derived, so the delayed lookup t - delay lands on a
/// grid node at every resolution and refined grids share node times exactly.
class TimeGrid {
public:
    /// Validates delay > 0, horizon > 0, N >= 1, dt in (0,1), and that the
    /// horizon is an integer number of steps. Throws std::invalid_argument.
    TimeGrid(double delay, double horizon, int steps_per_delay)
        : delay_(delay), horizon_(horizon), steps_per_delay_(steps_per_delay) {
        if (!(std::isfinite(delay) && delay > 0.0))
            throw std::invalid_argument("TimeGrid: delay must be positive and finite");
        if (!(std::isfinite(horizon) && horizon > 0.0))
            throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
        if (steps_per_delay < 1)
            throw std::invalid_argument("TimeGrid: steps per delay must be >= 1");
        const double step = delay / steps_per_delay;
        if (!(step > 0.0 && step < 1.0))
            throw std::invalid_argument("TimeGrid: step size " + std::to_string(step) +
                                        " must lie in (0,1)");
        const double steps_to_horizon = horizon / delay * steps_per_delay;
        const double rounded = std::nearbyint(steps_to_horizon);
        if (std::abs(steps_to_horizon - rounded) >
            1e-9 * std::max(1.0, std::abs(steps_to_horizon)))
            throw std::invalid_argument(
                "TimeGrid: horizon is not an integer multiple of the step size");
        if (rounded < 1.0 || rounded > 9.0e18)
            throw std::invalid_argument("TimeGrid: horizon step count out of range");
        total_steps_ = static_cast<std::int64_t>(rounded);
    }

    double delay() const { return delay_; }
    double horizon() const { return horizon_; }
    int steps_per_delay() const { return steps_per_delay_; }   // N
    std::int64_t total_steps() const { return total_steps_; }  // M
    double dt() const { return delay_ / steps_per_delay_; }

    /// Node time k*dt for k in [-N, M]; negative k addresses the initial
    /// segment.
    double time_at(std::int64_t k) const { return static_cast<double>(k) * dt(); }

    /// Index of the delayed state for step k: callers map negative results
    /// into the initial segment at time (k - N)*dt.
    std::int64_t delayed_index(std::int64_t k) const { return k - steps_per_delay_; }

    /// Same grid with N multiplied by a power-of-2 factor; node times of the
    /// original grid are preserved bitwise at shared indices.
    TimeGrid refined(int factor) const {
        if (!detail::is_power_of_two(factor))
            throw std::invalid_argument("TimeGrid::refined: factor must be a power of 2");
        if (steps_per_delay_ > std::numeric_limits<int>::max() / factor)
            throw std::invalid_argument("TimeGrid::refined: factor overflows step count");
        return TimeGrid(delay_, horizon_, steps_per_delay_ * factor);
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    double delay_;
    double horizon_;
    int steps_per_delay_;
    std::int64_t total_steps_;
};

inline TimeGrid make_grid(double delay, double horizon, int steps_per_delay) {
    return TimeGrid(delay, horizon, steps_per_delay);
}

inline TimeGrid refine(const TimeGrid& grid, int factor) { return grid.refined(factor); }

inline std::int64_t delayed_index(const TimeGrid& grid, std::int64_t k) {
    return grid.delayed_index(k);
}

}  // namespace delaysim
