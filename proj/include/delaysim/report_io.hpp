#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>

#include <json.hpp>

#include "delaysim/convergence.hpp"
#include "delaysim/em_solver.hpp"
#include "delaysim/models.hpp"
#include "delaysim/smoothing.hpp"
#include "delaysim/version.hpp"

namespace delaysim {

/// Shortest decimal representation that round-trips to the same double, so
/// identical runs produce byte-identical files.
inline std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    if (result.ec != std::errc()) return "nan";
    return std::string(buffer, result.ptr);
}

/// FNV-1a 64-bit hash, used to fingerprint resolved experiment configs.
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

inline std::string hex64(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

/// Canonical key=value rendering of a resolved config (sorted keys, one per
/// line) whose FNV-1a hash identifies the experiment. Callers exclude
/// presentation-only settings (output path, format, worker count).
inline std::string canonical_config_string(const std::map<std::string, std::string>& fields) {
    std::string out;
    for (const auto& [key, value] : fields) {
        out += key;
        out += '=';
        out += value;
        out += '\n';
    }
    return out;
}

inline std::string config_fingerprint(const std::map<std::string, std::string>& fields) {
    return hex64(fnv1a64(canonical_config_string(fields)));
}

/// CSV with header `level,dt,p,paths,divergent,error_p,error_root,stderr`;
/// one row per level, coarse first.
inline void write_rate_csv(std::ostream& out, const RateReport& report) {
    out << "level,dt,p,paths,divergent,error_p,error_root,stderr\n";
    for (const auto& level : report.levels) {
        out << level.steps_per_delay << ',' << format_double(level.dt) << ','
            << format_double(report.p) << ',' << level.paths_used << ',' << level.divergent
            << ',' << format_double(level.error_p) << ',' << format_double(level.error_root)
            << ',' << format_double(level.std_error) << '\n';
    }
}

/// CSV with header `dt,p,moment,stderr`; one row per level, coarse first.
inline void write_increment_csv(std::ostream& out, const IncrementReport& report) {
    out << "dt,p,moment,stderr\n";
    for (const auto& level : report.levels) {
        out << format_double(level.dt) << ',' << format_double(report.p) << ','
            << format_double(level.moment) << ',' << format_double(level.std_error) << '\n';
    }
}

/// CSV with header `t,component_0..component_{n-1}` covering the initial
/// segment (t in [-delay, 0)) and the solution (t in [0, horizon]).
inline void write_path_csv(std::ostream& out, const PathLattice& path) {
    out << 't';
    for (int d = 0; d < path.dimension; ++d) out << ",component_" << d;
    out << '\n';
    for (std::int64_t k = -path.grid.steps_per_delay(); k <= path.grid.total_steps(); ++k) {
        out << format_double(path.grid.time_at(k));
        for (double v : path.at(k)) out << ',' << format_double(v);
        out << '\n';
    }
}

/// JSON summary of a rate experiment: slope and uncertainty, the jump-rate
/// metadata (theta, alpha), seed, audit fields, and the per-level table.
inline nlohmann::json rate_summary(const RateReport& report, const std::string& config_hash) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& level : report.levels)
        levels.push_back({{"steps_per_delay", level.steps_per_delay},
                          {"dt", level.dt},
                          {"error_p", level.error_p},
                          {"error_root", level.error_root},
                          {"stderr", level.std_error},
                          {"divergent", level.divergent},
                          {"paths_used", level.paths_used}});
    return {{"artifact_version", version_string},
            {"config_hash", config_hash},
            {"slope", report.slope},
            {"slope_stderr", report.slope_stderr},
            {"theta", report.rate_theta},
            {"alpha", report.rate_alpha},
            {"seed", report.seed},
            {"p", report.p},
            {"paths", report.paths},
            {"levels", levels}};
}

inline nlohmann::json increment_summary(const IncrementReport& report,
                                        const std::string& config_hash) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& level : report.levels)
        levels.push_back({{"steps_per_delay", level.steps_per_delay},
                          {"dt", level.dt},
                          {"moment", level.moment},
                          {"stderr", level.std_error},
                          {"divergent", level.divergent}});
    return {{"artifact_version", version_string},
            {"config_hash", config_hash},
            {"slope", report.slope},
            {"slope_stderr", report.slope_stderr},
            {"seed", report.seed},
            {"p", report.p},
            {"paths", report.paths},
            {"levels", levels}};
}

inline nlohmann::json smoothing_summary(const SmoothingReport& report) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : report.items)
        items.push_back({{"property", item.property},
                         {"samples", item.samples},
                         {"max_violation", item.max_violation},
                         {"tolerance", item.tolerance},
                         {"pass", item.pass}});
    return {{"artifact_version", version_string},
            {"delta", report.delta},
            {"epsilon", report.epsilon},
            {"pass", report.pass()},
            {"checks", items}};
}

inline nlohmann::json validation_summary(const ValidationReport& report) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& check : report.checks)
        checks.push_back(
            {{"condition", check.name}, {"max_ratio", check.max_ratio}, {"pass", check.pass}});
    return {{"artifact_version", version_string},
            {"model", report.model},
            {"trials", report.trials},
            {"pass", report.pass()},
            {"checks", checks}};
}

}  // namespace delaysim
