#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "delaysim/rng.hpp"

namespace delaysim {

/// Growth envelope for a delay modulus: V(x,y) <= K * (1 + |x|^q + |y|^q).
struct GrowthBound {
    double coefficient = 0.0;  // K
    double exponent = 1.0;     // q >= 1
};

/// Coefficient functions of one equation plus the declared regularity
/// metadata against which they are statistically validated:
///
///   |drift(x1,y1) - drift(x2,y2)|     <= L1|x1-x2| + V1(y1,y2)|y1-y2|
///   |diffusion(...) - diffusion(...)| <= L2|x1-x2| + V2(y1,y2)|y1-y2|   (HS norm)
///   |jump_gain(...) - jump_gain(...)| <= L3|x1-x2| + V3(y1,y2)|y1-y2|
///
/// Exactly one of diffusion / jump_gain is present: the equation is driven
/// either by Brownian increments or by a compensated compound Poisson
/// measure, never both.
struct ModelSpec {
    using CoefficientFn =
        std::function<void(std::span<const double> current, std::span<const double> delayed,
                           std::span<double> out)>;
    using ModulusFn =
        std::function<double(std::span<const double> a, std::span<const double> b)>;

    std::string name = "custom";
    int state_dimension = 1;
    int brownian_dimension = 0;  // 0 for pure-jump models

    CoefficientFn drift;                    // out: state_dimension
    CoefficientFn diffusion;                // out: state_dimension x brownian_dimension
    CoefficientFn jump_gain;                // out: state_dimension (G in G(x,y)*u)

    double drift_lipschitz = 0.0;           // L1
    double diffusion_lipschitz = 0.0;       // L2
    double jump_lipschitz = 0.0;            // L3

    ModulusFn drift_delay_modulus;          // V1
    ModulusFn diffusion_delay_modulus;      // V2
    ModulusFn jump_delay_modulus;           // V3

    GrowthBound drift_growth;               // (K1, q1)
    GrowthBound diffusion_growth;           // (K2, q2)
    GrowthBound jump_growth;                // (K3, q3)

    bool has_diffusion() const { return static_cast<bool>(diffusion); }
    bool has_jump_gain() const { return static_cast<bool>(jump_gain); }
};

/// Integer exponents act as true powers (so even powers stay nonnegative);
/// fractional exponents use the sign-preserving odd extension sign(x)|x|^q,
/// which keeps the map defined and monotone on all of R.
inline double pow_signed(double x, double q) {
    if (x >= 0.0) return std::pow(x, q);
    double integral_part = 0.0;
    if (std::modf(q, &integral_part) == 0.0) return std::pow(x, q);
    return -std::pow(-x, q);
}

/// Scalar model with drift a*x + b*y^3 and diffusion c*y^2, y being the
/// delayed state. The delay moduli are
///   V1(u,v) = (3|b|/2)(u^2 + v^2),   V2(u,v) = |c|(|u| + |v|),
/// both with growth exponent 2.
inline ModelSpec cubic_delay_model(double a, double b, double c) {
    ModelSpec m;
    m.name = "cubic-delay";
    m.state_dimension = 1;
    m.brownian_dimension = 1;
    m.drift = [a, b](std::span<const double> x, std::span<const double> y,
                     std::span<double> out) {
        out[0] = a * x[0] + b * y[0] * y[0] * y[0];
    };
    m.diffusion = [c](std::span<const double>, std::span<const double> y,
                      std::span<double> out) { out[0] = c * y[0] * y[0]; };
    m.drift_lipschitz = std::abs(a);
    m.diffusion_lipschitz = 0.0;
    m.drift_delay_modulus = [b](std::span<const double> u, std::span<const double> v) {
        return 1.5 * std::abs(b) * (u[0] * u[0] + v[0] * v[0]);
    };
    m.diffusion_delay_modulus = [c](std::span<const double> u, std::span<const double> v) {
        return std::abs(c) * (std::abs(u[0]) + std::abs(v[0]));
    };
    m.drift_growth = {1.5 * std::abs(b), 2.0};
    m.diffusion_growth = {std::abs(c), 2.0};
    return m;
}

/// Scalar pure-jump model with separable jump coefficient
/// G(x,y) = theta * y^q and optional linear drift a*x. The delay modulus is
/// the mean-value bound V3(u,v) = |theta| * q * max(|u|,|v|)^{q-1}.
inline ModelSpec power_delay_jump_model(double theta, double q, double drift_coeff = 0.0) {
    if (!(std::isfinite(q) && q >= 1.0))
        throw std::invalid_argument("power_delay_jump_model: exponent must be >= 1");
    ModelSpec m;
    m.name = "power-delay-jump";
    m.state_dimension = 1;
    m.brownian_dimension = 0;
    m.drift = [drift_coeff](std::span<const double> x, std::span<const double>,
                            std::span<double> out) { out[0] = drift_coeff * x[0]; };
    m.jump_gain = [theta, q](std::span<const double>, std::span<const double> y,
                             std::span<double> out) { out[0] = theta * pow_signed(y[0], q); };
    m.drift_lipschitz = std::abs(drift_coeff);
    m.jump_lipschitz = 0.0;
    m.drift_delay_modulus = [](std::span<const double>, std::span<const double>) {
        return 0.0;
    };
    m.jump_delay_modulus = [theta, q](std::span<const double> u, std::span<const double> v) {
        return std::abs(theta) * q * std::pow(std::max(std::abs(u[0]), std::abs(v[0])), q - 1.0);
    };
    m.drift_growth = {0.0, 1.0};
    m.jump_growth = {std::abs(theta) * q, q >= 2.0 ? q - 1.0 : 1.0};
    return m;
}

/// Result of checking one declared inequality by sampling.
struct ConditionCheck {
    std::string name;
    double max_ratio = 0.0;  // worst observed lhs/rhs (0 when lhs is 0)
    bool pass = false;
};

struct ValidationReport {
    std::string model;
    long trials = 0;
    std::vector<ConditionCheck> checks;

    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

/// Fills (x1, y1, x2, y2) for one validation trial.
using QuadrupleSampler = std::function<void(
    RandomStream& rng, long trial, std::span<double> x1, std::span<double> y1,
    std::span<double> x2, std::span<double> y2)>;

/// Default sampler: i.i.d. Normal(0, s^2) coordinates with the scale s
/// cycling through {0.5, 2, 8}, so both small and large arguments probe the
/// polynomial bounds.
inline QuadrupleSampler stratified_normal_sampler(
    std::vector<double> scales = {0.5, 2.0, 8.0}) {
    if (scales.empty())
        throw std::invalid_argument("stratified_normal_sampler: need at least one scale");
    return [scales = std::move(scales)](RandomStream& rng, long trial, std::span<double> x1,
                                        std::span<double> y1, std::span<double> x2,
                                        std::span<double> y2) {
        const double s = scales[static_cast<std::size_t>(trial) % scales.size()];
        for (auto out : {x1, y1, x2, y2})
            for (auto& v : out) v = s * rng.next_normal();
    };
}

namespace detail {

inline double euclidean(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

inline double euclidean_difference(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(sum);
}

// Ratio convention: a vanishing left-hand side always passes (ratio 0); a
// vanishing right-hand side with lhs > 0 is an unambiguous violation.
inline double violation_ratio(double lhs, double rhs) {
    if (lhs == 0.0) return 0.0;
    if (rhs == 0.0) return std::numeric_limits<double>::infinity();
    return lhs / rhs;
}

}  // namespace detail

/// Samples quadruples and reports, per declared inequality, the worst
/// observed lhs/rhs ratio. Pass means every ratio <= 1 + 1e-12.
inline ValidationReport validate_conditions(const ModelSpec& model,
                                            const QuadrupleSampler& sampler, long trials,
                                            std::uint64_t seed = 0) {
    if (trials < 1) throw std::invalid_argument("validate_conditions: trials must be >= 1");
    constexpr double tolerance = 1.0 + 1e-12;
    const int n = model.state_dimension;
    const int m = model.brownian_dimension;

    ValidationReport report;
    report.model = model.name;
    report.trials = trials;

    struct Slot {
        std::string name;
        std::function<double(std::span<const double>, std::span<const double>,
                             std::span<const double>, std::span<const double>)>
            ratio;
        double worst = 0.0;
    };
    std::vector<Slot> slots;

    std::vector<double> out_a(static_cast<std::size_t>(n) * std::max(1, m));
    std::vector<double> out_b(out_a.size());

    auto growth_rhs = [](const GrowthBound& g, std::span<const double> x,
                         std::span<const double> y) {
        return g.coefficient * (1.0 + std::pow(detail::euclidean(x), g.exponent) +
                                std::pow(detail::euclidean(y), g.exponent));
    };

    if (model.drift) {
        slots.push_back(
            {"drift-increment",
             [&model, &out_a, &out_b, n](std::span<const double> x1, std::span<const double> y1,
                                         std::span<const double> x2,
                                         std::span<const double> y2) {
                 model.drift(x1, y1, std::span<double>(out_a.data(), n));
                 model.drift(x2, y2, std::span<double>(out_b.data(), n));
                 const double lhs = detail::euclidean_difference(
                     std::span<const double>(out_a.data(), n),
                     std::span<const double>(out_b.data(), n));
                 const double rhs = model.drift_lipschitz * detail::euclidean_difference(x1, x2) +
                                    model.drift_delay_modulus(y1, y2) *
                                        detail::euclidean_difference(y1, y2);
                 return detail::violation_ratio(lhs, rhs);
             }});
        slots.push_back({"drift-modulus-growth",
                         [&model, growth_rhs](std::span<const double> x1,
                                              std::span<const double> y1, std::span<const double>,
                                              std::span<const double>) {
                             return detail::violation_ratio(model.drift_delay_modulus(x1, y1),
                                                            growth_rhs(model.drift_growth, x1, y1));
                         }});
    }
    if (model.has_diffusion()) {
        const std::size_t size = static_cast<std::size_t>(n) * m;
        slots.push_back(
            {"diffusion-increment",
             [&model, &out_a, &out_b, size](std::span<const double> x1,
                                            std::span<const double> y1,
                                            std::span<const double> x2,
                                            std::span<const double> y2) {
                 model.diffusion(x1, y1, std::span<double>(out_a.data(), size));
                 model.diffusion(x2, y2, std::span<double>(out_b.data(), size));
                 const double lhs = detail::euclidean_difference(
                     std::span<const double>(out_a.data(), size),
                     std::span<const double>(out_b.data(), size));
                 const double rhs =
                     model.diffusion_lipschitz * detail::euclidean_difference(x1, x2) +
                     model.diffusion_delay_modulus(y1, y2) *
                         detail::euclidean_difference(y1, y2);
                 return detail::violation_ratio(lhs, rhs);
             }});
        slots.push_back(
            {"diffusion-modulus-growth",
             [&model, growth_rhs](std::span<const double> x1, std::span<const double> y1,
                                  std::span<const double>, std::span<const double>) {
                 return detail::violation_ratio(model.diffusion_delay_modulus(x1, y1),
                                                growth_rhs(model.diffusion_growth, x1, y1));
             }});
    }
    if (model.has_jump_gain()) {
        slots.push_back(
            {"jump-increment",
             [&model, &out_a, &out_b, n](std::span<const double> x1, std::span<const double> y1,
                                         std::span<const double> x2,
                                         std::span<const double> y2) {
                 model.jump_gain(x1, y1, std::span<double>(out_a.data(), n));
                 model.jump_gain(x2, y2, std::span<double>(out_b.data(), n));
                 const double lhs = detail::euclidean_difference(
                     std::span<const double>(out_a.data(), n),
                     std::span<const double>(out_b.data(), n));
                 const double rhs = model.jump_lipschitz * detail::euclidean_difference(x1, x2) +
                                    model.jump_delay_modulus(y1, y2) *
                                        detail::euclidean_difference(y1, y2);
                 return detail::violation_ratio(lhs, rhs);
             }});
        slots.push_back({"jump-modulus-growth",
                         [&model, growth_rhs](std::span<const double> x1,
                                              std::span<const double> y1, std::span<const double>,
                                              std::span<const double>) {
                             return detail::violation_ratio(model.jump_delay_modulus(x1, y1),
                                                            growth_rhs(model.jump_growth, x1, y1));
                         }});
    }

    RandomStream rng(seed, streams::validation, 0);
    std::vector<double> x1(n), y1(n), x2(n), y2(n);
    for (long t = 0; t < trials; ++t) {
        sampler(rng, t, x1, y1, x2, y2);
        for (auto& slot : slots) slot.worst = std::max(slot.worst, slot.ratio(x1, y1, x2, y2));
    }
    for (auto& slot : slots)
        report.checks.push_back({slot.name, slot.worst, slot.worst <= tolerance});
    return report;
}

inline ValidationReport validate_conditions(const ModelSpec& model, long trials,
                                            std::uint64_t seed = 0) {
    return validate_conditions(model, stratified_normal_sampler(), trials, seed);
}

}  // namespace delaysim
