#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "delaysim/em_solver.hpp"

namespace delaysim {

/// The rate fit could not be carried out (fewer than 3 usable levels, or a
/// level with a non-positive error).
class SlopeFitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One point of a log-log rate fit. The standard error is carried along for
/// reporting; the fit itself is ordinary (unweighted) least squares.
struct FitPoint {
    double dt = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};

struct FitResult {
    double slope = 0.0;
    double slope_stderr = 0.0;
};

/// Ordinary least squares of log2(value) on log2(dt); the slope uncertainty
/// comes from the fit residuals. Requires >= 3 points with positive finite
/// values.
inline FitResult fit_order(std::span<const FitPoint> points) {
    if (points.size() < 3)
        throw SlopeFitError("rate fit needs at least 3 usable levels, got " +
                            std::to_string(points.size()));
    std::vector<double> xs, ys;
    xs.reserve(points.size());
    ys.reserve(points.size());
    for (const auto& pt : points) {
        if (!(pt.dt > 0.0) || !(pt.value > 0.0) || !std::isfinite(pt.value))
            throw SlopeFitError("rate fit requires positive finite errors at every level");
        xs.push_back(std::log2(pt.dt));
        ys.push_back(std::log2(pt.value));
    }
    const std::size_t n = xs.size();
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
        sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
    }
    if (sxx == 0.0) throw SlopeFitError("rate fit requires distinct step sizes");
    FitResult fit;
    fit.slope = sxy / sxx;
    const double intercept = mean_y - fit.slope * mean_x;
    double ss_resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - (intercept + fit.slope * xs[i]);
        ss_resid += r * r;
    }
    fit.slope_stderr = std::sqrt(ss_resid / (n - 2) / sxx);
    return fit;
}

/// Full description of a coupled-path rate experiment: solve each path at
/// the reference resolution, restrict the same noise to every level, and
/// compare on shared nodes.
struct ExperimentPlan {
    ModelSpec model;
    InitialSegment xi = InitialSegment::constant({0.0});
    double delay = 1.0;
    double horizon = 2.0;
    std::vector<int> levels;  // steps-per-delay ladder, ascending
    int reference_steps = 0;  // finest steps-per-delay (the reference)
    double p = 2.0;
    long paths = 0;
    int batches = 20;
    int workers = 1;
    std::uint64_t seed = 0;
    DriverSpec driver;
    // Metadata echoed into reports for the jump-rate reading of results.
    double rate_theta = 0.0;
    double rate_alpha = 0.0;
};

inline void validate_plan(const ExperimentPlan& plan) {
    if (plan.levels.empty()) throw std::invalid_argument("plan: levels must be nonempty");
    for (std::size_t i = 0; i < plan.levels.size(); ++i) {
        if (plan.levels[i] < 1) throw std::invalid_argument("plan: level steps must be >= 1");
        if (i > 0 && plan.levels[i] <= plan.levels[i - 1])
            throw std::invalid_argument("plan: levels must be strictly ascending");
    }
    for (int level : plan.levels) {
        if (plan.reference_steps <= level)
            throw std::invalid_argument("plan: reference must be finer than every level");
        if (plan.reference_steps % level != 0 ||
            !detail::is_power_of_two(plan.reference_steps / level))
            throw std::invalid_argument(
                "plan: reference must refine each level by a power of 2");
        TimeGrid(plan.delay, plan.horizon, level);  // validates alignment per level
    }
    TimeGrid(plan.delay, plan.horizon, plan.reference_steps);
    if (!(std::isfinite(plan.p) && plan.p >= 1.0))
        throw std::invalid_argument("plan: moment order p must be >= 1");
    if (plan.paths < 1) throw std::invalid_argument("plan: paths must be >= 1");
    if (plan.batches < 1 || plan.paths % plan.batches != 0)
        throw std::invalid_argument("plan: paths must be a positive multiple of batches");
    if (plan.workers < 1) throw std::invalid_argument("plan: workers must be >= 1");
    if (const auto* jump = std::get_if<CompoundPoissonDriver>(&plan.driver))
        if (!(std::isfinite(jump->intensity) && jump->intensity > 0.0))
            throw std::invalid_argument("plan: jump intensity must be positive");
}

struct LevelError {
    int steps_per_delay = 0;
    double dt = 0.0;
    double error_p = 0.0;     // estimate of E sup_k |X_ref - Y_level|^p
    double error_root = 0.0;  // error_p^{1/p}
    double std_error = 0.0;   // batch-means stderr of error_p
    long divergent = 0;
    long paths_used = 0;
};

struct RateReport {
    std::vector<LevelError> levels;  // sorted by dt descending (coarse first)
    double slope = 0.0;
    double slope_stderr = 0.0;
    double p = 2.0;
    long paths = 0;
    std::uint64_t seed = 0;
    double rate_theta = 0.0;
    double rate_alpha = 0.0;
};

namespace detail {

/// Sup over the coarse path's nodes of the Euclidean distance to the
/// reference path at the same times (reference index = k * factor).
inline double sup_distance(const PathLattice& reference, const PathLattice& coarse,
                           std::int64_t factor) {
    const int n = coarse.dimension;
    double worst = 0.0;
    for (std::int64_t k = 0; k <= coarse.grid.total_steps(); ++k) {
        const double* a = coarse.values.data() + static_cast<std::size_t>(k) * n;
        const double* b =
            reference.values.data() + static_cast<std::size_t>(k * factor) * n;
        double sq = 0.0;
        for (int d = 0; d < n; ++d) sq += (a[d] - b[d]) * (a[d] - b[d]);
        worst = std::max(worst, sq);
    }
    return std::sqrt(worst);
}

}  // namespace detail

/// Runs the coupled-path experiment. Determinism contract: the report is a
/// pure function of (plan minus workers); per-batch accumulation in path
/// order plus cross-batch reduction in batch order keeps the floating-point
/// totals identical for every worker count.
inline RateReport run_convergence(const ExperimentPlan& plan) {
    validate_plan(plan);
    const TimeGrid ref_grid(plan.delay, plan.horizon, plan.reference_steps);
    const std::size_t level_count = plan.levels.size();
    std::vector<TimeGrid> grids;
    std::vector<int> factors;
    grids.reserve(level_count);
    for (int level : plan.levels) {
        grids.emplace_back(plan.delay, plan.horizon, level);
        factors.push_back(plan.reference_steps / level);
    }
    const long per_batch = plan.paths / plan.batches;
    const bool brownian = std::holds_alternative<BrownianDriver>(plan.driver);

    struct BatchResult {
        std::vector<double> sums;  // per level: sum over paths of sup^p
        std::vector<long> used;
        std::vector<long> divergent;
    };

    auto job = [&](int batch) {
        BatchResult result;
        result.sums.assign(level_count, 0.0);
        result.used.assign(level_count, 0);
        result.divergent.assign(level_count, 0);
        for (long i = 0; i < per_batch; ++i) {
            const std::uint32_t path_index =
                static_cast<std::uint32_t>(batch * per_batch + i);
            if (brownian) {
                const BrownianBatch fine = sample_brownian(
                    ref_grid, plan.model.brownian_dimension,
                    {plan.seed, streams::brownian, path_index});
                std::optional<PathLattice> reference;
                try {
                    reference.emplace(em_brownian(plan.model, plan.xi, ref_grid, fine));
                } catch (const DivergenceError&) {
                    for (std::size_t l = 0; l < level_count; ++l) ++result.divergent[l];
                    continue;
                }
                for (std::size_t l = 0; l < level_count; ++l) {
                    try {
                        const PathLattice coarse = em_brownian(
                            plan.model, plan.xi, grids[l],
                            aggregate_brownian(fine, factors[l]));
                        const double sup = detail::sup_distance(*reference, coarse, factors[l]);
                        result.sums[l] += std::pow(sup, plan.p);
                        ++result.used[l];
                    } catch (const DivergenceError&) {
                        ++result.divergent[l];
                    }
                }
            } else {
                const auto& driver = std::get<CompoundPoissonDriver>(plan.driver);
                const JumpRealization jumps = sample_jumps(
                    ref_grid, driver.intensity, driver.marks,
                    {plan.seed, streams::jumps, path_index});
                std::optional<PathLattice> reference;
                try {
                    reference.emplace(em_jump(plan.model, plan.xi, ref_grid, jumps));
                } catch (const DivergenceError&) {
                    for (std::size_t l = 0; l < level_count; ++l) ++result.divergent[l];
                    continue;
                }
                for (std::size_t l = 0; l < level_count; ++l) {
                    try {
                        const PathLattice coarse =
                            em_jump(plan.model, plan.xi, grids[l], jumps);
                        const double sup = detail::sup_distance(*reference, coarse, factors[l]);
                        result.sums[l] += std::pow(sup, plan.p);
                        ++result.used[l];
                    } catch (const DivergenceError&) {
                        ++result.divergent[l];
                    }
                }
            }
        }
        return result;
    };

    const auto results = run_batches<BatchResult>(plan.batches, plan.workers, job);

    RateReport report;
    report.p = plan.p;
    report.paths = plan.paths;
    report.seed = plan.seed;
    report.rate_theta = plan.rate_theta;
    report.rate_alpha = plan.rate_alpha;

    std::vector<FitPoint> fit_points;
    for (std::size_t l = 0; l < level_count; ++l) {
        std::vector<double> sums(results.size());
        std::vector<long> counts(results.size());
        long divergent = 0;
        for (std::size_t b = 0; b < results.size(); ++b) {
            sums[b] = results[b].sums[l];
            counts[b] = results[b].used[l];
            divergent += results[b].divergent[l];
        }
        const BatchSummary summary = summarize_batches(sums, counts);
        LevelError level;
        level.steps_per_delay = plan.levels[l];
        level.dt = grids[l].dt();
        level.divergent = divergent;
        level.paths_used = plan.paths - divergent;
        if (level.paths_used > 0) {
            level.error_p = summary.mean;
            level.error_root = std::pow(summary.mean, 1.0 / plan.p);
            level.std_error = summary.std_error;
            if (level.error_root > 0.0 && std::isfinite(level.error_root))
                fit_points.push_back({level.dt, level.error_root, level.std_error});
        }
        report.levels.push_back(level);
    }
    const FitResult fit = fit_order(fit_points);
    report.slope = fit.slope;
    report.slope_stderr = fit.slope_stderr;
    return report;
}

/// Plain Monte Carlo estimate with its batch-means uncertainty.
struct MomentEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long divergent = 0;
    long paths = 0;
};

/// Monte Carlo estimate of E sup_k |Y(t_k)|^p at one resolution; the
/// boundedness surrogate used to confirm that refining dt does not inflate
/// the path moments.
inline MomentEstimate moment_sup_check(const ModelSpec& model, const InitialSegment& xi,
                                       const TimeGrid& grid, const DriverSpec& driver, double p,
                                       long paths, std::uint64_t seed, int batches = 20,
                                       int workers = 1) {
    if (!(std::isfinite(p) && p >= 2.0))
        throw std::invalid_argument("moment_sup_check: p must be >= 2");
    if (paths < 1 || batches < 1 || paths % batches != 0)
        throw std::invalid_argument(
            "moment_sup_check: paths must be a positive multiple of batches");
    const long per_batch = paths / batches;
    const int n = model.state_dimension;

    struct BatchResult {
        double sum = 0.0;
        long used = 0;
        long divergent = 0;
    };

    auto job = [&](int batch) {
        BatchResult result;
        for (long i = 0; i < per_batch; ++i) {
            const std::uint32_t path_index = static_cast<std::uint32_t>(batch * per_batch + i);
            try {
                const PathLattice path = std::visit(
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
                double worst = 0.0;
                for (std::int64_t k = 0; k <= grid.total_steps(); ++k) {
                    const double* row = path.values.data() + static_cast<std::size_t>(k) * n;
                    double sq = 0.0;
                    for (int d = 0; d < n; ++d) sq += row[d] * row[d];
                    worst = std::max(worst, sq);
                }
                result.sum += std::pow(worst, 0.5 * p);
                ++result.used;
            } catch (const DivergenceError&) {
                ++result.divergent;
            }
        }
        return result;
    };

    const auto results = run_batches<BatchResult>(batches, workers, job);
    std::vector<double> sums(results.size());
    std::vector<long> counts(results.size());
    MomentEstimate estimate;
    estimate.paths = paths;
    for (std::size_t b = 0; b < results.size(); ++b) {
        sums[b] = results[b].sum;
        counts[b] = results[b].used;
        estimate.divergent += results[b].divergent;
    }
    const BatchSummary summary = summarize_batches(sums, counts);
    estimate.value = summary.mean;
    estimate.std_error = summary.std_error;
    return estimate;
}

/// Increment-scaling probe: the same moment estimate across a level ladder
/// plus the fitted log2-log2 slope of the raw p-th moment against dt.
struct IncrementPlan {
    ModelSpec model;
    InitialSegment xi = InitialSegment::constant({0.0});
    double delay = 1.0;
    double horizon = 2.0;
    std::vector<int> levels;
    double p = 2.0;
    long paths = 0;
    int batches = 20;
    int workers = 1;
    std::uint64_t seed = 0;
    DriverSpec driver;
};

struct IncrementLevel {
    int steps_per_delay = 0;
    double dt = 0.0;
    double moment = 0.0;
    double std_error = 0.0;
    long divergent = 0;
};

struct IncrementReport {
    std::vector<IncrementLevel> levels;
    double slope = 0.0;
    double slope_stderr = 0.0;
    double p = 2.0;
    long paths = 0;
    std::uint64_t seed = 0;
};

inline IncrementReport run_increment_probe(const IncrementPlan& plan) {
    if (plan.levels.empty()) throw std::invalid_argument("plan: levels must be nonempty");
    for (std::size_t i = 1; i < plan.levels.size(); ++i)
        if (plan.levels[i] <= plan.levels[i - 1])
            throw std::invalid_argument("plan: levels must be strictly ascending");
    IncrementReport report;
    report.p = plan.p;
    report.paths = plan.paths;
    report.seed = plan.seed;
    std::vector<FitPoint> fit_points;
    for (int level : plan.levels) {
        const TimeGrid grid(plan.delay, plan.horizon, level);
        const IncrementMomentEstimate estimate =
            increment_moments(plan.model, plan.xi, grid, plan.driver, plan.p, plan.paths,
                              plan.seed, plan.batches, plan.workers);
        report.levels.push_back(
            {level, grid.dt(), estimate.value, estimate.std_error, estimate.divergent});
        if (estimate.value > 0.0 && std::isfinite(estimate.value))
            fit_points.push_back({grid.dt(), estimate.value, estimate.std_error});
    }
    const FitResult fit = fit_order(fit_points);
    report.slope = fit.slope;
    report.slope_stderr = fit.slope_stderr;
    return report;
}

}  // namespace delaysim
