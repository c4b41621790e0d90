#pragma once

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <thread>
#include <vector>

#include "modesim/rng.hpp"

namespace modesim::ensemble {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Canonical remainder into [0, 2pi). Single reduction point for the whole
// library so there is no +/-pi ambiguity between modules.
inline double mod_two_pi(double x) {
    double r = std::fmod(x, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return (r >= kTwoPi) ? 0.0 : r;
}

// Uniform phase law on [0, 2pi): either the continuous distribution or G
// equally weighted support points { 2*pi*k/G : 0 <= k < G }.
class PhaseDistribution {
public:
    enum class Kind { continuous_uniform, discrete_uniform };

    static PhaseDistribution continuous() { return PhaseDistribution(Kind::continuous_uniform, 0); }

    static PhaseDistribution discrete(std::uint32_t levels) {
        if (levels == 0) throw std::invalid_argument("discrete phase distribution needs levels >= 1");
        return PhaseDistribution(Kind::discrete_uniform, levels);
    }

    Kind kind() const { return kind_; }
    std::uint32_t levels() const { return levels_; }
    bool is_discrete() const { return kind_ == Kind::discrete_uniform; }

    double sample(rng::PhiloxStream& stream) const {
        const double u = stream.next_double();
        if (kind_ == Kind::continuous_uniform) return u * kTwoPi;
        auto k = static_cast<std::uint32_t>(u * levels_);
        if (k >= levels_) k = levels_ - 1;
        return kTwoPi * static_cast<double>(k) / static_cast<double>(levels_);
    }

    bool operator==(const PhaseDistribution&) const = default;

private:
    PhaseDistribution(Kind kind, std::uint32_t levels) : kind_(kind), levels_(levels) {}

    Kind kind_;
    std::uint32_t levels_;
};

// Exact moment E[e^{i m lambda}] of the phase law: 1 when the harmonic is
// killed by periodicity (m = 0 continuous, m = 0 mod G discrete), else 0.
inline std::complex<double> ensemble_mean_exp(const PhaseDistribution& dist, std::int64_t harmonic) {
    if (dist.is_discrete()) {
        const auto g = static_cast<std::int64_t>(dist.levels());
        return (harmonic % g == 0) ? std::complex<double>{1.0, 0.0} : std::complex<double>{0.0, 0.0};
    }
    return (harmonic == 0) ? std::complex<double>{1.0, 0.0} : std::complex<double>{0.0, 0.0};
}

// One sampled realization: N global phases phi_i plus the derived cyclic
// differences lambda_i = phi_{i+1} - phi_i (lambda_N wraps to phi_1 - phi_N),
// each reduced into [0, 2pi). The differences telescope to 0 mod 2pi.
struct TrialPhases {
    std::vector<double> global_phases;
    std::vector<double> differences;

    std::size_t n_fields() const { return global_phases.size(); }
};

inline void sample_trial_phases_into(std::size_t n_fields, const PhaseDistribution& dist,
                                     const rng::RngStreamKey& key, TrialPhases& out) {
    if (n_fields == 0) throw std::invalid_argument("sample_trial_phases: n_fields must be >= 1");
    out.global_phases.resize(n_fields);
    out.differences.resize(n_fields);
    for (std::size_t i = 0; i < n_fields; ++i) {
        rng::PhiloxStream stream({key.master_seed, key.trial_index,
                                  key.field_index + static_cast<std::uint32_t>(i)});
        out.global_phases[i] = dist.sample(stream);
    }
    for (std::size_t i = 0; i < n_fields; ++i) {
        const std::size_t next = (i + 1 == n_fields) ? 0 : i + 1;
        out.differences[i] = mod_two_pi(out.global_phases[next] - out.global_phases[i]);
    }
}

inline TrialPhases sample_trial_phases(std::size_t n_fields, const PhaseDistribution& dist,
                                       const rng::RngStreamKey& key) {
    TrialPhases trial;
    sample_trial_phases_into(n_fields, dist, key, trial);
    return trial;
}

// Running central moments up to order four (Welford/Pebay update and merge).
// Merging is exact w.r.t. evaluation grouping only if the grouping is fixed,
// which the Monte Carlo driver guarantees with fixed-size chunks.
struct RunningMoments {
    std::int64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;

    void push(double x) {
        const double n1 = static_cast<double>(count);
        ++count;
        const double n = static_cast<double>(count);
        const double delta = x - mean;
        const double delta_n = delta / n;
        const double delta_n2 = delta_n * delta_n;
        const double term1 = delta * delta_n * n1;
        mean += delta_n;
        m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2 - 4.0 * delta_n * m3;
        m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2;
        m2 += term1;
    }

    void merge(const RunningMoments& b) {
        if (b.count == 0) return;
        if (count == 0) {
            *this = b;
            return;
        }
        const double na = static_cast<double>(count);
        const double nb = static_cast<double>(b.count);
        const double n = na + nb;
        const double delta = b.mean - mean;
        const double d2 = delta * delta;

        const double m4_new = m4 + b.m4 + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                              6.0 * d2 * (na * na * b.m2 + nb * nb * m2) / (n * n) +
                              4.0 * delta * (na * b.m3 - nb * m3) / n;
        const double m3_new = m3 + b.m3 + delta * d2 * na * nb * (na - nb) / (n * n) +
                              3.0 * delta * (na * b.m2 - nb * m2) / n;
        const double m2_new = m2 + b.m2 + d2 * na * nb / n;

        mean += delta * nb / n;
        m2 = m2_new;
        m3 = m3_new;
        m4 = m4_new;
        count += b.count;
    }

    double sample_variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double fourth_central_moment() const { return count > 0 ? m4 / static_cast<double>(count) : 0.0; }

    // Asymptotic standard error of the sample variance, sqrt((m4 - s^4)/n).
    double variance_std_error() const {
        if (count < 2) return 0.0;
        const double s2 = sample_variance();
        const double v = fourth_central_moment() - s2 * s2;
        return v > 0.0 ? std::sqrt(v / static_cast<double>(count)) : 0.0;
    }
};

// Monte Carlo sample statistics for one observable.
struct CorrelationEstimate {
    double mean = 0.0;
    double variance = 0.0;  // unbiased sample variance; 0 for analytic results
    std::int64_t count = 0;

    double std_error() const {
        return count > 0 ? std::sqrt(variance / static_cast<double>(count)) : 0.0;
    }
};

namespace detail {

// Fixed chunk size decouples the reduction tree from the worker count:
// chunk statistics are always merged in chunk order.
inline constexpr std::int64_t kMcChunk = 4096;

inline int resolve_threads(int threads) {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw > 16 ? 16 : hw);
}

}  // namespace detail

// Deterministic parallel ensemble average of `observable` over `trials`
// independent phase realizations. Trial t draws its phases from streams
// keyed (master_seed, trial_offset + t, field), so the estimate is
// bit-identical for any worker count and any chunk scheduling.
template <typename Observable>
RunningMoments monte_carlo_moments(Observable&& observable, std::size_t n_fields,
                                   const PhaseDistribution& dist, std::int64_t trials,
                                   std::uint64_t master_seed, int threads = 0,
                                   std::uint64_t trial_offset = 0) {
    if (trials < 2) throw std::invalid_argument("monte_carlo_average: trials must be >= 2");
    if (n_fields == 0) throw std::invalid_argument("monte_carlo_average: n_fields must be >= 1");

    const std::int64_t n_chunks = (trials + detail::kMcChunk - 1) / detail::kMcChunk;
    std::vector<RunningMoments> chunk_stats(static_cast<std::size_t>(n_chunks));

    const int n_workers = std::min<std::int64_t>(detail::resolve_threads(threads), n_chunks);
    std::atomic<std::int64_t> next_chunk{0};

    auto worker = [&]() {
        TrialPhases trial;
        for (;;) {
            const std::int64_t c = next_chunk.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks) break;
            RunningMoments stats;
            const std::int64_t begin = c * detail::kMcChunk;
            const std::int64_t end = std::min(trials, begin + detail::kMcChunk);
            for (std::int64_t t = begin; t < end; ++t) {
                sample_trial_phases_into(n_fields, dist,
                                         {master_seed, trial_offset + static_cast<std::uint64_t>(t), 0},
                                         trial);
                stats.push(observable(trial));
            }
            chunk_stats[static_cast<std::size_t>(c)] = stats;
        }
    };

    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    RunningMoments total;
    for (const auto& s : chunk_stats) total.merge(s);
    return total;
}

template <typename Observable>
CorrelationEstimate monte_carlo_average(Observable&& observable, std::size_t n_fields,
                                        const PhaseDistribution& dist, std::int64_t trials,
                                        std::uint64_t master_seed, int threads = 0,
                                        std::uint64_t trial_offset = 0) {
    const RunningMoments m = monte_carlo_moments(observable, n_fields, dist, trials, master_seed,
                                                 threads, trial_offset);
    return {m.mean, m.sample_variance(), m.count};
}

}  // namespace modesim::ensemble
