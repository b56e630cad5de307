#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "delaysim/drivers.hpp"
#include "delaysim/initial_segment.hpp"
#include "delaysim/models.hpp"
#include "delaysim/stats.hpp"
#include "delaysim/time_grid.hpp"

namespace delaysim {

enum class PathKind { em, analytic_reference };

/// One discretized path: the initial segment sampled on [-delay, 0] plus the
/// solution values on [0, horizon]. Node k of the combined lattice holds the
/// state at time k*dt for k in [-N, M]; history[N] and values[0] coincide.
struct PathLattice {
    TimeGrid grid;
    int dimension = 1;
    std::vector<double> history;  // (N+1) x dimension, nodes -N..0
    std::vector<double> values;   // (M+1) x dimension, nodes 0..M
    PathKind kind = PathKind::em;

    std::span<const double> at(std::int64_t k) const {
        if (k < 0)
            return {history.data() +
                        static_cast<std::size_t>(k + grid.steps_per_delay()) * dimension,
                    static_cast<std::size_t>(dimension)};
        return {values.data() + static_cast<std::size_t>(k) * dimension,
                static_cast<std::size_t>(dimension)};
    }
};

/// A path left the representable range (the cubic delay terms can explode);
/// carries the first step index whose update produced a non-finite state.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(std::int64_t step)
        : std::runtime_error("path diverged at step " + std::to_string(step)), step_(step) {}

    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

namespace detail {

inline PathLattice init_lattice(const ModelSpec& model, const InitialSegment& xi,
                                const TimeGrid& grid) {
    if (xi.dimension() != model.state_dimension)
        throw std::invalid_argument("initial segment dimension does not match the model");
    const int n = model.state_dimension;
    const int N = grid.steps_per_delay();
    PathLattice path{grid, n, {}, {}, PathKind::em};
    path.history.resize(static_cast<std::size_t>(N + 1) * n);
    path.values.resize(static_cast<std::size_t>(grid.total_steps() + 1) * n);
    for (int i = 0; i <= N; ++i)
        xi.evaluate(grid.time_at(i - N),
                    std::span<double>(path.history.data() + static_cast<std::size_t>(i) * n,
                                      static_cast<std::size_t>(n)));
    // values[0] = history[N] = xi(0), bitwise.
    for (int d = 0; d < n; ++d)
        path.values[d] = path.history[static_cast<std::size_t>(N) * n + d];
    return path;
}

inline void check_finite(std::span<const double> state, std::int64_t step) {
    for (double v : state)
        if (!std::isfinite(v)) throw DivergenceError(step);
}

}  // namespace detail

/// Explicit one-step scheme for the Brownian case: coefficients are frozen at
/// the last grid node, the delayed argument is the state N steps back (read
/// from the initial segment during the first N steps):
///
///   Y_{k+1} = Y_k + drift(Y_k, Y_{k-N}) dt + diffusion(Y_k, Y_{k-N}) dW_k.
inline PathLattice em_brownian(const ModelSpec& model, const InitialSegment& xi,
                               const TimeGrid& grid, const BrownianBatch& noise) {
    if (!model.has_diffusion())
        throw std::invalid_argument("em_brownian: model does not declare a diffusion");
    if (model.has_jump_gain())
        throw std::invalid_argument("em_brownian: model declares a jump coefficient");
    if (noise.grid != grid)
        throw std::invalid_argument("em_brownian: noise resolution does not match the grid");
    if (noise.dimension != model.brownian_dimension)
        throw std::invalid_argument("em_brownian: noise dimension does not match the model");

    PathLattice path = detail::init_lattice(model, xi, grid);
    const int n = model.state_dimension;
    const int m = model.brownian_dimension;
    const double dt = grid.dt();
    const std::int64_t steps = grid.total_steps();
    std::vector<double> drift(n);
    std::vector<double> diffusion(static_cast<std::size_t>(n) * m);

    for (std::int64_t k = 0; k < steps; ++k) {
        const auto current = path.at(k);
        const auto delayed = path.at(grid.delayed_index(k));
        model.drift(current, delayed, drift);
        model.diffusion(current, delayed, diffusion);
        const auto dw = noise.row(k);
        double* next = path.values.data() + static_cast<std::size_t>(k + 1) * n;
        for (int i = 0; i < n; ++i) {
            double v = current[i] + drift[i] * dt;
            for (int j = 0; j < m; ++j) v += diffusion[static_cast<std::size_t>(i) * m + j] * dw[j];
            next[i] = v;
        }
        detail::check_finite({next, static_cast<std::size_t>(n)}, k + 1);
    }
    return path;
}

/// Explicit one-step scheme for the pure-jump case; the compensated measure
/// is integrated exactly over each step since the frozen integrand is
/// separable in the mark:
///
///   Y_{k+1} = Y_k + drift(Y_k, Y_{k-N}) dt
///           + G(Y_k, Y_{k-N}) * (sum of marks in (t_k, t_{k+1}] - compensator).
inline PathLattice em_jump(const ModelSpec& model, const InitialSegment& xi,
                           const TimeGrid& grid, const JumpRealization& jumps) {
    if (!model.has_jump_gain())
        throw std::invalid_argument("em_jump: model does not declare a jump coefficient");
    if (model.has_diffusion())
        throw std::invalid_argument("em_jump: model declares a diffusion");
    if (jumps.horizon != grid.horizon())
        throw std::invalid_argument("em_jump: realization horizon does not match the grid");

    PathLattice path = detail::init_lattice(model, xi, grid);
    const int n = model.state_dimension;
    const double dt = grid.dt();
    const std::int64_t steps = grid.total_steps();
    std::vector<double> drift(n);
    std::vector<double> gain(n);

    for (std::int64_t k = 0; k < steps; ++k) {
        const auto current = path.at(k);
        const auto delayed = path.at(grid.delayed_index(k));
        model.drift(current, delayed, drift);
        model.jump_gain(current, delayed, gain);
        const double jump_factor =
            compensated_jump_sum(jumps, grid.time_at(k), grid.time_at(k + 1));
        double* next = path.values.data() + static_cast<std::size_t>(k + 1) * n;
        for (int i = 0; i < n; ++i)
            next[i] = current[i] + drift[i] * dt + gain[i] * jump_factor;
        detail::check_finite({next, static_cast<std::size_t>(n)}, k + 1);
    }
    return path;
}

/// Monte Carlo estimate of an increment moment at one resolution.
struct IncrementMomentEstimate {
    double value = 0.0;          // max over steps k of E |Y_{k+1} - Y_k|^p
    double std_error = 0.0;      // batch-means standard error at the worst step
    std::int64_t worst_step = 0; // the maximizing k
    long divergent = 0;          // paths excluded because they blew up
    long paths = 0;
};

/// Estimates max_k E|Y_{k+1} - Y_k|^p by simulating `paths` independent
/// paths. Divergent paths are excluded from the average and counted. The
/// result is a pure function of (plan, seed); workers only change wall time.
inline IncrementMomentEstimate increment_moments(const ModelSpec& model,
                                                 const InitialSegment& xi, const TimeGrid& grid,
                                                 const DriverSpec& driver, double p, long paths,
                                                 std::uint64_t seed, int batches = 20,
                                                 int workers = 1) {
    if (!(std::isfinite(p) && p >= 2.0))
        throw std::invalid_argument("increment_moments: p must be >= 2");
    if (paths < 1 || batches < 1 || paths % batches != 0)
        throw std::invalid_argument(
            "increment_moments: paths must be a positive multiple of batches");

    const std::int64_t steps = grid.total_steps();
    const int n = model.state_dimension;
    const long per_batch = paths / batches;

    struct BatchResult {
        std::vector<double> step_sums;  // per step k: sum over paths of |dY_k|^p
        long used = 0;
        long divergent = 0;
    };

    auto job = [&](int batch) {
        BatchResult result;
        result.step_sums.assign(static_cast<std::size_t>(steps), 0.0);
        std::vector<double> path_powers(static_cast<std::size_t>(steps));
        for (long i = 0; i < per_batch; ++i) {
            const std::uint32_t path_index = static_cast<std::uint32_t>(batch * per_batch + i);
            try {
                PathLattice path = std::visit(
                    [&](const auto& d) -> PathLattice {
                        using D = std::decay_t<decltype(d)>;
                        if constexpr (std::is_same_v<D, BrownianDriver>) {
                            return em_brownian(model, xi, grid,
                                               sample_brownian(grid, model.brownian_dimension,
                                                               {seed, streams::brownian,
                                                                path_index}));
                        } else {
                            return em_jump(model, xi, grid,
                                           sample_jumps(grid, d.intensity, d.marks,
                                                        {seed, streams::jumps, path_index}));
                        }
                    },
                    driver);
                for (std::int64_t k = 0; k < steps; ++k) {
                    double sq = 0.0;
                    const double* row = path.values.data() + static_cast<std::size_t>(k) * n;
                    for (int d = 0; d < n; ++d) {
                        const double diff = row[d + n] - row[d];
                        sq += diff * diff;
                    }
                    path_powers[static_cast<std::size_t>(k)] = std::pow(sq, 0.5 * p);
                }
            } catch (const DivergenceError&) {
                ++result.divergent;
                continue;
            }
            for (std::int64_t k = 0; k < steps; ++k)
                result.step_sums[static_cast<std::size_t>(k)] +=
                    path_powers[static_cast<std::size_t>(k)];
            ++result.used;
        }
        return result;
    };

    const auto results = run_batches<BatchResult>(batches, workers, job);

    IncrementMomentEstimate estimate;
    estimate.paths = paths;
    long used_total = 0;
    for (const auto& r : results) {
        estimate.divergent += r.divergent;
        used_total += r.used;
    }
    if (used_total == 0) {
        estimate.value = std::numeric_limits<double>::quiet_NaN();
        estimate.std_error = std::numeric_limits<double>::quiet_NaN();
        return estimate;
    }
    std::int64_t worst = 0;
    double worst_mean = -1.0;
    for (std::int64_t k = 0; k < steps; ++k) {
        double total = 0.0;
        for (const auto& r : results) total += r.step_sums[static_cast<std::size_t>(k)];
        const double mean = total / used_total;
        if (mean > worst_mean) {
            worst_mean = mean;
            worst = k;
        }
    }
    std::vector<double> sums(results.size());
    std::vector<long> counts(results.size());
    for (std::size_t b = 0; b < results.size(); ++b) {
        sums[b] = results[b].step_sums[static_cast<std::size_t>(worst)];
        counts[b] = results[b].used;
    }
    const BatchSummary summary = summarize_batches(sums, counts);
    estimate.value = summary.mean;
    estimate.std_error = summary.std_error;
    estimate.worst_step = worst;
    return estimate;
}

}  // namespace delaysim
