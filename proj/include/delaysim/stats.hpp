#pragma once

#include <atomic>
#include <cmath>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace delaysim {

/// Mean over all contributing samples plus the batch-means standard error of
/// that mean. `sums` holds per-batch totals, `counts` per-batch sample
/// counts; empty batches are ignored.
struct BatchSummary {
    double mean = 0.0;
    double std_error = 0.0;
    int batches_used = 0;
};

inline BatchSummary summarize_batches(std::span<const double> sums,
                                      std::span<const long> counts) {
    if (sums.size() != counts.size())
        throw std::invalid_argument("summarize_batches: size mismatch");
    double total = 0.0;
    long total_count = 0;
    std::vector<double> means;
    means.reserve(sums.size());
    for (std::size_t b = 0; b < sums.size(); ++b) {
        if (counts[b] <= 0) continue;
        total += sums[b];
        total_count += counts[b];
        means.push_back(sums[b] / counts[b]);
    }
    BatchSummary out;
    out.batches_used = static_cast<int>(means.size());
    if (total_count == 0) return out;
    out.mean = total / total_count;
    if (means.size() >= 2) {
        double centre = 0.0;
        for (double m : means) centre += m;
        centre /= means.size();
        double ss = 0.0;
        for (double m : means) ss += (m - centre) * (m - centre);
        out.std_error = std::sqrt(ss / (means.size() - 1) / means.size());
    }
    return out;
}

/// Runs `batches` independent jobs on up to `workers` threads. Results are
/// stored by batch index, so any later reduction over them is independent of
/// scheduling; the jobs themselves must not share mutable state.
template <class Result, class Fn>
std::vector<Result> run_batches(int batches, int workers, Fn&& job) {
    if (batches < 1) throw std::invalid_argument("run_batches: batches must be >= 1");
    if (workers < 1) throw std::invalid_argument("run_batches: workers must be >= 1");
    std::vector<Result> results(batches);
    if (workers == 1 || batches == 1) {
        for (int b = 0; b < batches; ++b) results[b] = job(b);
        return results;
    }
    std::atomic<int> next{0};
    auto drain = [&] {
        for (int b = next.fetch_add(1); b < batches; b = next.fetch_add(1))
            results[b] = job(b);
    };
    std::vector<std::thread> pool;
    const int thread_count = std::min(workers, batches);
    pool.reserve(thread_count);
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(drain);
    for (auto& t : pool) t.join();
    return results;
}

}  // namespace delaysim
