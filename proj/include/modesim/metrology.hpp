#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "modesim/correlation.hpp"
#include "modesim/ensemble.hpp"

namespace modesim::metrology {

using ensemble::PhaseDistribution;

// Baseline phase error of n independent repetitions, 1/sqrt(n).
inline double sql_phase_error(std::int64_t n) {
    if (n < 1) throw std::invalid_argument("sql_phase_error: n must be >= 1");
    return 1.0 / std::sqrt(static_cast<double>(n));
}

inline double analytic_signal(int n, double theta) {
    return correlation::n_field_correlation(theta, n);
}

// d/dtheta of cos(n theta)/2^{n-1}.
inline double analytic_slope(int n, double theta) {
    if (n < 1) throw std::invalid_argument("analytic_slope: n must be >= 1");
    return -static_cast<double>(n) * std::sin(n * theta) / std::ldexp(1.0, n - 1);
}

// The published variance expression [cos(2n theta) - sin^2(n theta)] / 2^{2n-2}.
// It goes negative on part of the theta range, so it cannot be a variance
// globally; we evaluate it verbatim and flag where it fails.
struct PaperVariance {
    double value = 0.0;
    bool valid = false;
};

inline PaperVariance paper_variance(int n, double theta) {
    if (n < 1) throw std::invalid_argument("paper_variance: n must be >= 1");
    const double s = std::sin(n * theta);
    const double v = (std::cos(2.0 * n * theta) - s * s) / std::ldexp(1.0, 2 * n - 2);
    return {v, v >= 0.0};
}

// Closed-form single-trial variance of the n-fold analyzer product.
//   cyclic:      the phase differences obey the telescoping constraint;
//                the theta terms cancel and the variance is 2^{-n} - 2^{1-2n}.
//   independent: every lambda drawn independently; second moment 2^{-n}
//                against the cyclic mean cos^2(n theta)/2^{2n-2}.
// Both are validated against brute-force quadrature in the tests. The
// independent form is an oracle for n >= 2; at n = 1 it goes negative
// because the cyclic mean does not apply to an unconstrained phase.
enum class VarianceModel { cyclic, independent };

inline double derived_variance(int n, double theta, VarianceModel model) {
    if (n < 1) throw std::invalid_argument("derived_variance: n must be >= 1");
    const double second_moment = std::ldexp(1.0, -n);
    if (model == VarianceModel::cyclic) return second_moment - std::ldexp(1.0, 1 - 2 * n);
    const double mean = std::cos(n * theta) / std::ldexp(1.0, n - 1);
    return second_moment - mean * mean;
}

// Operating point where sin(n theta) = 1/2 and the published variance
// reduces to exactly 2^{-2n}.
inline double heisenberg_theta_star(int n) {
    if (n < 1) throw std::invalid_argument("heisenberg_theta_star: n must be >= 1");
    return std::numbers::pi / (6.0 * n);
}

// Error-propagation pipeline of the published claim: at theta*,
// sqrt(variance)/|slope| collapses to 1/n. Computed through the formulas,
// not returned as a literal, so the algebra is what is being exercised.
inline double heisenberg_phase_error(int n) {
    const double theta = heisenberg_theta_star(n);
    const PaperVariance v = paper_variance(n, theta);
    return std::sqrt(v.value) / std::abs(analytic_slope(n, theta));
}

struct MetrologyResult {
    int n_fields = 1;
    double theta = 0.0;
    double s_mean = 0.0;      // MC estimate of the n-field correlation
    double s_analytic = 0.0;  // cos(n theta)/2^{n-1}
    double s_variance_mc = 0.0;
    double s_variance_paper = 0.0;
    bool paper_valid = false;
    double s_variance_derived = 0.0;  // cyclic model
    double slope = 0.0;               // central difference of the analytic mean
    double delta_theta_paper = 0.0;   // NaN where paper_variance() is negative
    double delta_theta_derived = 0.0;
    double delta_theta_sql = 0.0;
    double mean_std_error = 0.0;
    double variance_std_error = 0.0;
    std::int64_t trials = 0;
};

// Trial indices are namespaced per (n, theta) cell so every cell draws an
// independent deterministic stream regardless of evaluation order.
inline constexpr std::uint64_t kCellStride = std::uint64_t{1} << 40;

inline std::vector<MetrologyResult> phase_error_scan(const std::vector<int>& n_values,
                                                     const std::vector<double>& theta_grid,
                                                     std::int64_t trials, std::uint64_t seed,
                                                     const PhaseDistribution& dist =
                                                         PhaseDistribution::continuous(),
                                                     int threads = 0, std::uint64_t cell_base = 0) {
    if (n_values.empty() || theta_grid.empty())
        throw std::invalid_argument("phase_error_scan: empty n range or theta grid");
    if (trials < 100) throw std::invalid_argument("phase_error_scan: trials must be >= 100");
    if (trials >= static_cast<std::int64_t>(kCellStride))
        throw std::invalid_argument("phase_error_scan: trials exceed the per-cell stream stride");

    constexpr double kSlopeStep = 1e-4;
    std::vector<MetrologyResult> out;
    out.reserve(n_values.size() * theta_grid.size());
    std::uint64_t cell = cell_base;
    for (const int n : n_values) {
        if (n < 1) throw std::invalid_argument("phase_error_scan: n must be >= 1");
        for (const double theta : theta_grid) {
            const ensemble::RunningMoments m = ensemble::monte_carlo_moments(
                [=](const ensemble::TrialPhases& trial) {
                    double p = 1.0;
                    for (double lambda : trial.differences) p *= std::cos(theta + lambda);
                    return p;
                },
                static_cast<std::size_t>(n), dist, trials, seed, threads, cell * kCellStride);
            ++cell;

            MetrologyResult r;
            r.n_fields = n;
            r.theta = theta;
            r.s_mean = m.mean;
            r.s_analytic = analytic_signal(n, theta);
            r.s_variance_mc = m.sample_variance();
            const PaperVariance pv = paper_variance(n, theta);
            r.s_variance_paper = pv.value;
            r.paper_valid = pv.valid;
            r.s_variance_derived = derived_variance(n, theta, VarianceModel::cyclic);
            r.slope = (analytic_signal(n, theta + kSlopeStep) - analytic_signal(n, theta - kSlopeStep)) /
                      (2.0 * kSlopeStep);
            const double abs_slope = std::abs(r.slope);
            r.delta_theta_paper = (pv.valid && abs_slope > 0.0)
                                      ? std::sqrt(pv.value) / abs_slope
                                      : std::numeric_limits<double>::quiet_NaN();
            r.delta_theta_derived = abs_slope > 0.0
                                        ? std::sqrt(r.s_variance_derived) / abs_slope
                                        : std::numeric_limits<double>::quiet_NaN();
            r.delta_theta_sql = sql_phase_error(n);
            r.mean_std_error = std::sqrt(m.sample_variance() / static_cast<double>(m.count));
            r.variance_std_error = m.variance_std_error();
            r.trials = m.count;
            out.push_back(r);
        }
    }
    return out;
}

// Discrete-Fourier fringe analysis of a signal sampled on a uniform theta
// grid covering [0, 2pi). Used to verify super-resolution: an n-field scan
// must peak at frequency exactly n with amplitude 2^{1-n}.
struct FringeAnalysis {
    int dominant_frequency = 0;
    double amplitude = 0.0;
};

inline FringeAnalysis dominant_fringe(const std::vector<double>& samples) {
    const std::size_t m = samples.size();
    if (m < 4) throw std::invalid_argument("dominant_fringe: need at least 4 samples");
    FringeAnalysis best;
    double best_mag = -1.0;
    for (std::size_t k = 1; k <= m / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double arg = ensemble::kTwoPi * static_cast<double>(j * k % m) / static_cast<double>(m);
            re += samples[j] * std::cos(arg);
            im -= samples[j] * std::sin(arg);
        }
        const double mag = std::hypot(re, im);
        if (mag > best_mag) {
            best_mag = mag;
            best.dominant_frequency = static_cast<int>(k);
            const double scale = (2 * k == m) ? 1.0 : 2.0;
            best.amplitude = scale * mag / static_cast<double>(m);
        }
    }
    return best;
}

}  // namespace modesim::metrology
