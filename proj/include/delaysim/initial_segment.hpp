#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace delaysim {

/// Bounded continuous function on [-delay, 0] supplying the delayed state
/// before the solution exists. Built-ins cover constant and affine segments;
/// arbitrary callables are accepted with a caller-declared sup bound.
class InitialSegment {
public:
    using Fn = std::function<void(double theta, std::span<double> out)>;

    InitialSegment(Fn fn, int dimension, double sup_norm)
        : fn_(std::move(fn)), dimension_(dimension), sup_norm_(sup_norm) {
        if (dimension < 1)
            throw std::invalid_argument("InitialSegment: dimension must be >= 1");
        if (!(std::isfinite(sup_norm) && sup_norm >= 0.0))
            throw std::invalid_argument("InitialSegment: sup norm must be finite");
        if (!fn_) throw std::invalid_argument("InitialSegment: missing function");
    }

    static InitialSegment constant(std::vector<double> value) {
        const double bound = euclidean(value);
        const int dim = static_cast<int>(value.size());
        return InitialSegment(
            [value = std::move(value)](double, std::span<double> out) {
                for (std::size_t i = 0; i < value.size(); ++i) out[i] = value[i];
            },
            dim, bound);
    }

    /// xi(theta) = value_at_zero + theta * slope on [-delay, 0].
    static InitialSegment affine(std::vector<double> value_at_zero, std::vector<double> slope,
                                 double delay) {
        if (value_at_zero.size() != slope.size())
            throw std::invalid_argument("InitialSegment::affine: dimension mismatch");
        if (!(std::isfinite(delay) && delay > 0.0))
            throw std::invalid_argument("InitialSegment::affine: delay must be positive");
        std::vector<double> at_start(value_at_zero.size());
        for (std::size_t i = 0; i < slope.size(); ++i)
            at_start[i] = value_at_zero[i] - delay * slope[i];
        // The norm of an affine path is convex in theta, so the sup over the
        // segment is attained at an endpoint.
        const double bound = std::max(euclidean(value_at_zero), euclidean(at_start));
        const int dim = static_cast<int>(slope.size());
        return InitialSegment(
            [value_at_zero = std::move(value_at_zero),
             slope = std::move(slope)](double theta, std::span<double> out) {
                for (std::size_t i = 0; i < slope.size(); ++i)
                    out[i] = value_at_zero[i] + theta * slope[i];
            },
            dim, bound);
    }

    int dimension() const { return dimension_; }
    double sup_norm() const { return sup_norm_; }

    void evaluate(double theta, std::span<double> out) const { fn_(theta, out); }

private:
    static double euclidean(const std::vector<double>& v) {
        double sum = 0.0;
        for (double x : v) sum += x * x;
        return std::sqrt(sum);
    }

    Fn fn_;
    int dimension_;
    double sup_norm_;
};

}  // namespace delaysim
