#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "delaysim/quadrature.hpp"
#include "delaysim/rng.hpp"
#include "delaysim/time_grid.hpp"

namespace delaysim {

/// One path's Brownian increments at a fixed resolution: M rows of width
/// `dimension`, each entry ~ Normal(0, dt).
struct BrownianBatch {
    TimeGrid grid;
    int dimension = 1;
    std::vector<double> increments;  // row-major [M][dimension]

    std::span<const double> row(std::int64_t k) const {
        return {increments.data() + static_cast<std::size_t>(k) * dimension,
                static_cast<std::size_t>(dimension)};
    }
};

/// Draws the full increment batch for one path. Pure function of the stream
/// key; entries are laid out step-major so aggregation is a contiguous scan.
inline BrownianBatch sample_brownian(const TimeGrid& grid, int dimension,
                                     const StreamKey& key) {
    if (dimension < 1)
        throw std::invalid_argument("sample_brownian: dimension must be >= 1");
    BrownianBatch batch{grid, dimension, {}};
    const std::size_t count =
        static_cast<std::size_t>(grid.total_steps()) * static_cast<std::size_t>(dimension);
    batch.increments.resize(count);
    RandomStream rng(key);
    const double stddev = std::sqrt(grid.dt());
    for (std::size_t i = 0; i < count; ++i) batch.increments[i] = stddev * rng.next_normal();
    return batch;
}

/// Sums consecutive blocks of `factor` fine increments into one coarse
/// increment, strictly left to right, so the coarse batch is the exact
/// floating-point restriction of the same Brownian path.
inline BrownianBatch aggregate_brownian(const BrownianBatch& fine, int factor) {
    if (!detail::is_power_of_two(factor))
        throw std::invalid_argument("aggregate_brownian: factor must be a power of 2");
    if (factor == 1) return fine;
    if (fine.grid.steps_per_delay() % factor != 0)
        throw std::invalid_argument("aggregate_brownian: factor does not divide the grid");
    const TimeGrid coarse_grid(fine.grid.delay(), fine.grid.horizon(),
                               fine.grid.steps_per_delay() / factor);
    BrownianBatch coarse{coarse_grid, fine.dimension, {}};
    const std::int64_t coarse_steps = coarse.grid.total_steps();
    const int dim = fine.dimension;
    coarse.increments.assign(static_cast<std::size_t>(coarse_steps) * dim, 0.0);
    for (std::int64_t j = 0; j < coarse_steps; ++j)
        for (std::int64_t i = j * factor; i < (j + 1) * factor; ++i)
            for (int d = 0; d < dim; ++d)
                coarse.increments[j * dim + d] += fine.increments[i * dim + d];
    return coarse;
}

/// Scalar mark law of a compound Poisson driver; knows its mean and absolute
/// moments so compensation and moment diagnostics are exact.
class MarkDistribution {
public:
    static MarkDistribution uniform(double lo, double hi) {
        if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
            throw std::invalid_argument("MarkDistribution::uniform: need lo < hi");
        MarkDistribution d;
        d.kind_ = Kind::uniform;
        d.a_ = lo;
        d.b_ = hi;
        d.mean_ = 0.5 * (lo + hi);
        return d;
    }

    static MarkDistribution normal(double mean, double stddev) {
        if (!(std::isfinite(mean) && std::isfinite(stddev) && stddev >= 0.0))
            throw std::invalid_argument("MarkDistribution::normal: need stddev >= 0");
        MarkDistribution d;
        d.kind_ = Kind::normal;
        d.a_ = mean;
        d.b_ = stddev;
        d.mean_ = mean;
        return d;
    }

    static MarkDistribution discrete(std::vector<double> values, std::vector<double> weights) {
        if (values.empty() || values.size() != weights.size())
            throw std::invalid_argument(
                "MarkDistribution::discrete: need matching nonempty values/weights");
        MarkDistribution d;
        d.kind_ = Kind::discrete;
        d.values_ = std::move(values);
        double total = 0.0;
        for (double w : weights) {
            if (!(std::isfinite(w) && w > 0.0))
                throw std::invalid_argument("MarkDistribution::discrete: weights must be > 0");
            total += w;
        }
        d.cumulative_.resize(weights.size());
        double acc = 0.0;
        double mean = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            d.cumulative_[i] = acc / total;
            mean += weights[i] * d.values_[i];
        }
        d.cumulative_.back() = 1.0;
        d.mean_ = mean / total;
        return d;
    }

    double mean() const { return mean_; }

    /// Normalized absolute moment E|u|^p.
    double abs_moment(double p) const {
        if (!(std::isfinite(p) && p >= 0.0))
            throw std::invalid_argument("MarkDistribution::abs_moment: need p >= 0");
        switch (kind_) {
            case Kind::uniform: {
                // Antiderivative of |u|^p is sign(u)|u|^{p+1}/(p+1).
                auto anti = [p](double u) {
                    return std::copysign(std::pow(std::abs(u), p + 1.0), u) / (p + 1.0);
                };
                return (anti(b_) - anti(a_)) / (b_ - a_);
            }
            case Kind::normal: {
                if (b_ == 0.0) return std::pow(std::abs(a_), p);
                const double lo = a_ - 12.0 * b_;
                const double hi = a_ + 12.0 * b_;
                const auto& rule = gauss_legendre(64);
                auto integrand = [this, p](double u) {
                    const double z = (u - a_) / b_;
                    return std::pow(std::abs(u), p) * std::exp(-0.5 * z * z) /
                           (b_ * std::sqrt(2.0 * std::numbers::pi));
                };
                // Split at 0 where |u|^p has a kink.
                if (lo < 0.0 && hi > 0.0)
                    return integrate(rule, lo, 0.0, integrand) +
                           integrate(rule, 0.0, hi, integrand);
                return integrate(rule, lo, hi, integrand);
            }
            case Kind::discrete: {
                double acc = 0.0;
                double prev = 0.0;
                for (std::size_t i = 0; i < values_.size(); ++i) {
                    acc += (cumulative_[i] - prev) * std::pow(std::abs(values_[i]), p);
                    prev = cumulative_[i];
                }
                return acc;
            }
        }
        return 0.0;
    }

    double sample(RandomStream& rng) const {
        switch (kind_) {
            case Kind::uniform:
                return a_ + (b_ - a_) * rng.next_uniform();
            case Kind::normal:
                return a_ + b_ * rng.next_normal();
            case Kind::discrete: {
                const double u = rng.next_uniform();
                const auto it =
                    std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
                const std::size_t idx = std::min<std::size_t>(
                    static_cast<std::size_t>(it - cumulative_.begin()),
                    values_.size() - 1);
                return values_[idx];
            }
        }
        return 0.0;
    }

    /// Stable textual identity, used for config fingerprints and reports.
    std::string describe() const {
        std::ostringstream out;
        out.precision(17);
        switch (kind_) {
            case Kind::uniform:
                out << "uniform(" << a_ << "," << b_ << ")";
                break;
            case Kind::normal:
                out << "normal(" << a_ << "," << b_ << ")";
                break;
            case Kind::discrete: {
                out << "discrete(";
                double prev = 0.0;
                for (std::size_t i = 0; i < values_.size(); ++i) {
                    if (i) out << ",";
                    out << values_[i] << ":" << cumulative_[i] - prev;
                    prev = cumulative_[i];
                }
                out << ")";
                break;
            }
        }
        return out.str();
    }

private:
    enum class Kind { uniform, normal, discrete };
    MarkDistribution() = default;

    Kind kind_ = Kind::uniform;
    double a_ = 0.0, b_ = 1.0;  // uniform bounds, or normal (mean, stddev)
    std::vector<double> values_;
    std::vector<double> cumulative_;
    double mean_ = 0.5;
};

/// One path of a finite-activity compound Poisson driver over (0, horizon].
struct JumpRealization {
    double horizon = 0.0;
    double total_intensity = 0.0;  // lambda
    double mark_mean = 0.0;        // E[mark], used for exact compensation
    std::vector<double> times;     // sorted ascending
    std::vector<double> marks;     // same length as times
};

/// Draws jump count ~ Poisson(intensity * horizon), then times (uniform on
/// (0, horizon], sorted), then marks. The fixed draw order makes the
/// realization a pure function of the stream key.
inline JumpRealization sample_jumps(const TimeGrid& grid, double intensity,
                                    const MarkDistribution& marks, const StreamKey& key) {
    if (!(std::isfinite(intensity) && intensity > 0.0))
        throw std::invalid_argument("sample_jumps: intensity must be positive and finite");
    JumpRealization jr;
    jr.horizon = grid.horizon();
    jr.total_intensity = intensity;
    jr.mark_mean = marks.mean();
    RandomStream rng(key);
    const long count = rng.next_poisson(intensity * jr.horizon);
    jr.times.resize(count);
    for (long i = 0; i < count; ++i) jr.times[i] = jr.horizon * rng.next_uniform();
    std::sort(jr.times.begin(), jr.times.end());
    jr.marks.resize(count);
    for (long i = 0; i < count; ++i) jr.marks[i] = marks.sample(rng);
    return jr;
}

/// Compensated mark sum over the window (t0, t1]:
/// sum of marks in the window minus intensity * mark_mean * (t1 - t0).
inline double compensated_jump_sum(const JumpRealization& jr, double t0, double t1) {
    if (!(t0 < t1)) throw std::invalid_argument("compensated_jump_sum: need t0 < t1");
    const auto first = std::upper_bound(jr.times.begin(), jr.times.end(), t0);
    const auto last = std::upper_bound(jr.times.begin(), jr.times.end(), t1);
    double sum = 0.0;
    for (auto it = first; it != last; ++it)
        sum += jr.marks[static_cast<std::size_t>(it - jr.times.begin())];
    return sum - jr.total_intensity * jr.mark_mean * (t1 - t0);
}

/// Exact compensated step integral of the separable integrand weight * u over
/// (t0, t1], written into out (same length as weight).
inline void step_jump_sum(const JumpRealization& jr, double t0, double t1,
                          std::span<const double> weight, std::span<double> out) {
    const double factor = compensated_jump_sum(jr, t0, t1);
    for (std::size_t i = 0; i < weight.size(); ++i) out[i] = weight[i] * factor;
}

inline std::vector<double> step_jump_sum(const JumpRealization& jr, double t0, double t1,
                                         std::span<const double> weight) {
    std::vector<double> out(weight.size());
    step_jump_sum(jr, t0, t1, weight, out);
    return out;
}

/// Driver selection for experiment plumbing: a model is driven either by
/// Brownian increments or by a compensated compound Poisson measure.
struct BrownianDriver {};

struct CompoundPoissonDriver {
    double intensity = 1.0;
    MarkDistribution marks = MarkDistribution::uniform(0.0, 1.0);
};

using DriverSpec = std::variant<BrownianDriver, CompoundPoissonDriver>;

}  // namespace delaysim
