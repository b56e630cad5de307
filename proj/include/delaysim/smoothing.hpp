#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "delaysim/quadrature.hpp"
#include "delaysim/rng.hpp"

namespace delaysim {

/// Parameters of the smoothing pair (psi, phi): psi is a unit-mass bump
/// supported on [epsilon/delta, epsilon] bounded by 2/(x ln delta), and phi
/// is its double antiderivative, squeezed between x - epsilon and x.
struct SmoothingParams {
    double delta;
    double epsilon;

    SmoothingParams(double delta_, double epsilon_) : delta(delta_), epsilon(epsilon_) {
        if (!(std::isfinite(delta) && delta > 1.0))
            throw std::invalid_argument("SmoothingParams: delta must be > 1");
        if (!(std::isfinite(epsilon) && epsilon > 0.0 && epsilon < 1.0))
            throw std::invalid_argument("SmoothingParams: epsilon must lie in (0,1)");
    }

    double support_lo() const { return epsilon / delta; }
    double support_hi() const { return epsilon; }
    /// Peak of the bump (the log-scale midpoint of the support).
    double support_peak() const { return epsilon / std::sqrt(delta); }
    /// Position of x inside the support on a log scale: 0 at epsilon/delta,
    /// 1 at epsilon.
    double log_position(double x) const { return std::log(x * delta / epsilon) / std::log(delta); }
};

/// Tent bump in log scale: psi(x) = g(s(x)) / (x ln delta) with
/// g(s) = 4s on [0,1/2], 4(1-s) on [1/2,1]. Unit mass by the substitution
/// s = s(x), and psi(x) * x * ln(delta) = g(s) <= 2 everywhere.
inline double psi(const SmoothingParams& p, double x) {
    if (!(x >= 0.0)) throw std::invalid_argument("psi: x must be >= 0");
    if (x <= p.support_lo() || x >= p.support_hi()) return 0.0;
    const double s = p.log_position(x);
    const double tent = s <= 0.5 ? 4.0 * s : 4.0 * (1.0 - s);
    return tent / (x * std::log(p.delta));
}

/// Exact antiderivative of psi (the inner integral of the double-integral
/// lift), in closed form: 0 below the support, 2s^2 on the rising half,
/// 1 - 2(1-s)^2 on the falling half, 1 above the support.
inline double psi_antiderivative(const SmoothingParams& p, double y) {
    if (!(y >= 0.0)) throw std::invalid_argument("psi_antiderivative: y must be >= 0");
    if (y <= p.support_lo()) return 0.0;
    if (y >= p.support_hi()) return 1.0;
    const double s = p.log_position(y);
    if (s <= 0.5) return 2.0 * s * s;
    const double r = 1.0 - s;
    return 1.0 - 2.0 * r * r;
}

namespace detail {

// Integral of psi_antiderivative over [support_lo, min(x, support_hi)]. The
// integrand is analytic on each half of the support (the kink sits at the
// peak), so one fixed Gauss rule per half reaches ~1e-15 accuracy.
inline double phi_core(const SmoothingParams& p, double x) {
    const auto& rule = gauss_legendre(64);
    auto inner = [&p](double y) { return psi_antiderivative(p, y); };
    const double lo = p.support_lo();
    const double peak = p.support_peak();
    const double hi = p.support_hi();
    double acc = 0.0;
    if (x > lo) acc += integrate(rule, lo, std::min(x, peak), inner);
    if (x > peak) acc += integrate(rule, peak, std::min(x, hi), inner);
    return acc;
}

}  // namespace detail

/// phi(x) = integral of psi_antiderivative from 0 to x: identically 0 below
/// the support, quadrature across the support, exact linear tail above it.
/// Satisfies x - epsilon <= phi(x) <= x and 0 <= phi' <= 1.
inline double phi(const SmoothingParams& p, double x) {
    if (!(x >= 0.0)) throw std::invalid_argument("phi: x must be >= 0");
    if (x <= p.support_lo()) return 0.0;
    if (x <= p.support_hi()) return detail::phi_core(p, x);
    return detail::phi_core(p, p.support_hi()) + (x - p.support_hi());
}

/// Radial lift of phi to vectors, with the derivative data used in
/// second-order expansions: value phi(|x|), gradient phi'(|x|) x/|x|, and a
/// check of the Hessian bound 2n(1 + 1/ln delta)/|x| that holds on the bump
/// support.
struct VLift {
    double value = 0.0;
    std::vector<double> gradient;
    double hessian_hs_norm = 0.0;   // Hilbert-Schmidt norm of the Hessian
    double hessian_bound = 0.0;     // 2n(1 + 1/ln delta)/|x| (support only)
    bool on_support = false;        // |x| inside [epsilon/delta, epsilon]
    bool hessian_within_bound = true;
};

inline VLift v_lift(const SmoothingParams& p, std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    VLift out;
    out.gradient.assign(n, 0.0);
    double sq = 0.0;
    for (double v : x) sq += v * v;
    const double r = std::sqrt(sq);
    if (r == 0.0) return out;  // phi vanishes identically near 0

    out.value = phi(p, r);
    const double first = psi_antiderivative(p, r);  // phi'(r)
    for (int i = 0; i < n; ++i) out.gradient[i] = first * x[i] / r;

    out.on_support = r >= p.support_lo() && r <= p.support_hi();
    if (out.on_support) {
        // Hessian of phi(|x|): (phi'/r)(I - xx^T/r^2) + phi'' xx^T/r^2, with
        // eigenvalues phi'/r (n-1 fold) and phi'' = psi(r).
        const double second = psi(p, r);
        const double radial = first / r;
        out.hessian_hs_norm = std::sqrt((n - 1) * radial * radial + second * second);
        out.hessian_bound = 2.0 * n * (1.0 + 1.0 / std::log(p.delta)) / r;
        out.hessian_within_bound = out.hessian_hs_norm <= out.hessian_bound * (1.0 + 1e-12);
    }
    return out;
}

/// One inequality of the smoothing property suite with its worst observed
/// violation (positive violation = failure beyond the stated tolerance).
struct SmoothingCheckItem {
    std::string property;
    long samples = 0;
    double max_violation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct SmoothingReport {
    double delta = 0.0;
    double epsilon = 0.0;
    std::vector<SmoothingCheckItem> items;

    bool pass() const {
        for (const auto& item : items)
            if (!item.pass) return false;
        return true;
    }
};

/// Property suite over log-uniform samples x in (1e-6, 1e2]: the sandwich
/// x - epsilon <= phi <= x, the derivative range [0,1], the peak bound
/// psi * x * ln(delta) <= 2, and unit mass of psi.
inline SmoothingReport run_smoothing_check(const SmoothingParams& p, long samples,
                                           std::uint64_t seed = 0) {
    if (samples < 1) throw std::invalid_argument("run_smoothing_check: samples must be >= 1");
    SmoothingReport report;
    report.delta = p.delta;
    report.epsilon = p.epsilon;

    RandomStream rng(seed, streams::smoothing, 0);
    const double log_lo = std::log(1e-6);
    const double log_hi = std::log(1e2);
    double sandwich = -std::numeric_limits<double>::infinity();
    double derivative_range = sandwich;
    double peak_bound = sandwich;
    const double ln_delta = std::log(p.delta);
    for (long i = 0; i < samples; ++i) {
        const double x = std::exp(log_lo + (log_hi - log_lo) * rng.next_uniform());
        const double value = phi(p, x);
        sandwich = std::max({sandwich, value - x, (x - p.epsilon) - value});
        const double first = psi_antiderivative(p, x);
        derivative_range = std::max({derivative_range, -first, first - 1.0});
        peak_bound = std::max(peak_bound, psi(p, x) * x * ln_delta - 2.0);
    }
    const auto& rule = gauss_legendre(64);
    auto bump = [&p](double x) { return psi(p, x); };
    const double mass = integrate(rule, p.support_lo(), p.support_peak(), bump) +
                        integrate(rule, p.support_peak(), p.support_hi(), bump);

    report.items.push_back({"phi-sandwich", samples, sandwich, 1e-9, sandwich <= 1e-9});
    report.items.push_back(
        {"phi-derivative-range", samples, derivative_range, 0.0, derivative_range <= 0.0});
    report.items.push_back({"psi-peak-bound", samples, peak_bound, 0.0, peak_bound <= 0.0});
    const double mass_error = std::abs(mass - 1.0);
    report.items.push_back({"psi-unit-mass", 1, mass_error, 1e-10, mass_error <= 1e-10});
    return report;
}

}  // namespace delaysim
