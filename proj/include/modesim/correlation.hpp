#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "modesim/ensemble.hpp"
#include "modesim/optics.hpp"

namespace modesim::correlation {

using Complex = std::complex<double>;
using ensemble::CorrelationEstimate;
using ensemble::PhaseDistribution;

// 4-component state vector of the two-field product, basis order
// (TE0 TE0, TE0 TE1, TE1 TE0, TE1 TE1) with field a as the major index.
using StateVec4 = std::array<Complex, 4>;

struct Matrix2 {
    std::array<Complex, 4> e{};

    Complex& operator()(std::size_t r, std::size_t c) { return e[2 * r + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return e[2 * r + c]; }

    Complex trace() const { return e[0] + e[3]; }
};

// Dense 4x4 complex matrix for two-field density operators.
class DensityMatrix4 {
public:
    Complex& operator()(std::size_t r, std::size_t c) { return e_[4 * r + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return e_[4 * r + c]; }

    Complex trace() const { return e_[0] + e_[5] + e_[10] + e_[15]; }

    DensityMatrix4& operator+=(const DensityMatrix4& other) {
        for (std::size_t i = 0; i < 16; ++i) e_[i] += other.e_[i];
        return *this;
    }

    DensityMatrix4& operator*=(double s) {
        for (auto& v : e_) v *= s;
        return *this;
    }

    double frobenius_distance(const DensityMatrix4& other) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < 16; ++i) acc += std::norm(e_[i] - other.e_[i]);
        return std::sqrt(acc);
    }

    double max_abs_diff(const DensityMatrix4& other) const {
        double m = 0.0;
        for (std::size_t i = 0; i < 16; ++i) m = std::max(m, std::abs(e_[i] - other.e_[i]));
        return m;
    }

    bool is_valid_density(double tol = 1e-12) const {
        if (std::abs(trace() - 1.0) > tol) return false;
        for (std::size_t r = 0; r < 4; ++r) {
            if ((*this)(r, r).imag() > tol || (*this)(r, r).real() < -tol) return false;
            for (std::size_t c = r + 1; c < 4; ++c)
                if (std::abs((*this)(r, c) - std::conj((*this)(c, r))) > tol) return false;
        }
        return true;
    }

private:
    std::array<Complex, 16> e_{};
};

inline DensityMatrix4 kron(const Matrix2& a, const Matrix2& b) {
    DensityMatrix4 out;
    for (std::size_t ia = 0; ia < 2; ++ia)
        for (std::size_t ib = 0; ib < 2; ++ib)
            for (std::size_t ja = 0; ja < 2; ++ja)
                for (std::size_t jb = 0; jb < 2; ++jb)
                    out(2 * ia + ib, 2 * ja + jb) = a(ia, ja) * b(ib, jb);
    return out;
}

// Tensor product of two mode states including both global phases. Feeding
// it the outputs of a coupler exchange yields the incoherent-superposition
// product vector with the e^{+-i lambda} offsets in the middle components.
inline StateVec4 product_state(const optics::ModeState& a, const optics::ModeState& b) {
    const Complex global = std::polar(1.0, a.global_phase + b.global_phase);
    return {global * a.c0 * b.c0, global * a.c0 * b.c1, global * a.c1 * b.c0, global * a.c1 * b.c1};
}

inline DensityMatrix4 density_from_vector(const StateVec4& v) {
    double norm2 = 0.0;
    for (const auto& c : v) norm2 += std::norm(c);
    if (std::abs(norm2 - 1.0) > 1e-9)
        throw std::invalid_argument("density_from_vector: input vector is not unit norm");
    DensityMatrix4 rho;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) rho(r, c) = v[r] * std::conj(v[c]);
    return rho;
}

enum class Keep { a, b };

inline Matrix2 partial_trace(const DensityMatrix4& rho, Keep keep) {
    Matrix2 out;
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 2; ++k) {
            Complex acc = 0.0;
            for (std::size_t m = 0; m < 2; ++m)
                acc += (keep == Keep::a) ? rho(2 * j + m, 2 * k + m) : rho(2 * m + j, 2 * m + k);
            out(j, k) = acc;
        }
    return out;
}

// Frobenius distance between rho and the tensor product of its own partial
// traces; zero exactly when the state factorizes.
inline double inseparability_gap(const DensityMatrix4& rho) {
    return rho.frobenius_distance(kron(partial_trace(rho, Keep::a), partial_trace(rho, Keep::b)));
}

struct ReducedDensity {
    DensityMatrix4 rho;
    // True when both the first and second harmonics of the phase law vanish,
    // i.e. the reduction reaches the corners-plus-diagonal Bell-like form.
    bool bell_form = false;
};

// Exact ensemble average over lambda of the balanced-amplitude density
// matrix. Entry (r, c) carries harmonic n_rc of lambda, so the average is
// 0.25 * E[e^{i n_rc lambda}] entry by entry.
inline ReducedDensity ensemble_reduce_density(const PhaseDistribution& dist) {
    static constexpr std::array<std::array<int, 4>, 4> kHarmonic{{
        {{0, 1, -1, 0}},
        {{-1, 0, -2, -1}},
        {{1, 2, 0, 1}},
        {{0, 1, -1, 0}},
    }};
    ReducedDensity out;
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            out.rho(r, c) = 0.25 * ensemble::ensemble_mean_exp(dist, kHarmonic[r][c]);
    const bool h1 = std::abs(ensemble::ensemble_mean_exp(dist, 1)) == 0.0;
    const bool h2 = std::abs(ensemble::ensemble_mean_exp(dist, 2)) == 0.0;
    out.bell_form = h1 && h2;
    return out;
}

// Monte Carlo parameters shared by the sampled estimators.
struct McParams {
    std::int64_t trials = 100000;
    PhaseDistribution dist = PhaseDistribution::continuous();
    std::uint64_t seed = 0;
    int threads = 0;
    std::uint64_t trial_offset = 0;
};

// Monte Carlo average of the physical two-field density matrix: balanced
// states with sampled phases, coupler exchange, outer product. Deterministic
// for any worker count.
inline DensityMatrix4 mc_average_density(const McParams& params) {
    if (params.trials < 1) throw std::invalid_argument("mc_average_density: trials must be >= 1");
    using Sum = std::array<Complex, 16>;
    const std::int64_t chunk = ensemble::detail::kMcChunk;
    const std::int64_t n_chunks = (params.trials + chunk - 1) / chunk;
    std::vector<Sum> sums(static_cast<std::size_t>(n_chunks), Sum{});

    const int n_workers =
        std::min<std::int64_t>(ensemble::detail::resolve_threads(params.threads), n_chunks);
    std::atomic<std::int64_t> next{0};
    auto worker = [&]() {
        ensemble::TrialPhases trial;
        for (;;) {
            const std::int64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks) break;
            Sum acc{};
            const std::int64_t begin = c * chunk;
            const std::int64_t end = std::min(params.trials, begin + chunk);
            for (std::int64_t t = begin; t < end; ++t) {
                ensemble::sample_trial_phases_into(
                    2, params.dist,
                    {params.seed, params.trial_offset + static_cast<std::uint64_t>(t), 0}, trial);
                auto [ap, bp] = optics::coupler_exchange_pair(
                    optics::ModeState::balanced(trial.global_phases[0]),
                    optics::ModeState::balanced(trial.global_phases[1]));
                const StateVec4 v = product_state(ap, bp);
                for (std::size_t r = 0; r < 4; ++r)
                    for (std::size_t cidx = 0; cidx < 4; ++cidx)
                        acc[4 * r + cidx] += v[r] * std::conj(v[cidx]);
            }
            sums[static_cast<std::size_t>(c)] = acc;
        }
    };
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    Sum total{};
    for (const auto& s : sums)
        for (std::size_t i = 0; i < 16; ++i) total[i] += s[i];
    DensityMatrix4 rho;
    const double inv = 1.0 / static_cast<double>(params.trials);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) rho(r, c) = total[4 * r + c] * inv;
    return rho;
}

// Sign/argument convention of the normalized two-analyzer correlation.
// The four conventions realize the four Bell-like state labels; the default
// exchange geometry gives cos(theta1 + theta2).
enum class CorrelationVariant { cos_sum, cos_diff, neg_cos_sum, neg_cos_diff };

inline double variant_sign(CorrelationVariant v) {
    return (v == CorrelationVariant::neg_cos_sum || v == CorrelationVariant::neg_cos_diff) ? -1.0 : 1.0;
}

inline bool variant_uses_sum(CorrelationVariant v) {
    return v == CorrelationVariant::cos_sum || v == CorrelationVariant::neg_cos_sum;
}

inline double analytic_correlation(CorrelationVariant v, double theta_a, double theta_b) {
    return variant_sign(v) * std::cos(variant_uses_sum(v) ? theta_a + theta_b : theta_a - theta_b);
}

// Single-trial analyzer readings for the two exchanged fields. These equal
// the optics pipeline (balanced states -> coupler -> analyzers) exactly;
// the equivalence is asserted in the unit tests.
inline double analyzer_a_reading(double theta, double lambda) { return std::cos(theta + lambda); }

inline double analyzer_b_reading(CorrelationVariant v, double theta, double lambda) {
    return variant_sign(v) * std::cos(variant_uses_sum(v) ? theta - lambda : theta + lambda);
}

// Normalized correlation of the two intensity differences,
// S = <A B> / sqrt(<A^2> <B^2>) with A = cos(theta1 + lambda) and
// B = cos(theta2 - lambda). Analytic value cos(theta1 + theta2).
inline double two_field_correlation(double theta1, double theta2) {
    return std::cos(theta1 + theta2);
}

namespace detail {

struct TwoFieldSums {
    ensemble::RunningMoments ab;
    double sum_a2 = 0.0;
    double sum_b2 = 0.0;

    void merge(const TwoFieldSums& o) {
        ab.merge(o.ab);
        sum_a2 += o.sum_a2;
        sum_b2 += o.sum_b2;
    }
};

template <typename ChunkFn>
void run_chunked(std::int64_t total, int threads, std::int64_t n_chunks, ChunkFn&& fn) {
    const int n_workers = std::min<std::int64_t>(ensemble::detail::resolve_threads(threads), n_chunks);
    std::atomic<std::int64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::int64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= n_chunks) break;
            fn(c);
        }
    };
    (void)total;
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
}

}  // namespace detail

// Monte Carlo version of the normalized correlation estimator. The denominator
// uses the per-run estimates of <A^2> and <B^2> (not the analytic 1/2), the
// reported variance is the numerator variance scaled by the normalization.
inline CorrelationEstimate two_field_correlation(double theta1, double theta2, const McParams& params,
                                                 CorrelationVariant variant = CorrelationVariant::cos_sum) {
    if (params.trials < 2) throw std::invalid_argument("two_field_correlation: trials must be >= 2");
    const std::int64_t chunk = ensemble::detail::kMcChunk;
    const std::int64_t n_chunks = (params.trials + chunk - 1) / chunk;
    std::vector<detail::TwoFieldSums> sums(static_cast<std::size_t>(n_chunks));

    detail::run_chunked(params.trials, params.threads, n_chunks, [&](std::int64_t c) {
        ensemble::TrialPhases trial;
        detail::TwoFieldSums acc;
        const std::int64_t begin = c * chunk;
        const std::int64_t end = std::min(params.trials, begin + chunk);
        for (std::int64_t t = begin; t < end; ++t) {
            ensemble::sample_trial_phases_into(
                2, params.dist, {params.seed, params.trial_offset + static_cast<std::uint64_t>(t), 0},
                trial);
            const double lambda = trial.differences[0];
            const double a = analyzer_a_reading(theta1, lambda);
            const double b = analyzer_b_reading(variant, theta2, lambda);
            acc.ab.push(a * b);
            acc.sum_a2 += a * a;
            acc.sum_b2 += b * b;
        }
        sums[static_cast<std::size_t>(c)] = acc;
    });

    detail::TwoFieldSums total;
    for (const auto& s : sums) total.merge(s);
    const double n = static_cast<double>(params.trials);
    const double denom = std::sqrt((total.sum_a2 / n) * (total.sum_b2 / n));
    if (denom <= 0.0) return {0.0, 0.0, params.trials};
    return {total.ab.mean / denom, total.ab.sample_variance() / (denom * denom), params.trials};
}

// Analyzer settings for the four-term CHSH combination.
struct ChshSettings {
    double theta1 = 0.0;
    double theta1p = 0.0;
    double theta2 = 0.0;
    double theta2p = 0.0;
    CorrelationVariant variant = CorrelationVariant::cos_sum;
};

// |B| = |S(t1,t2) - S(t1,t2') + S(t1',t2') + S(t1',t2)| from closed forms.
inline double chsh_value(const ChshSettings& s) {
    const double b = analytic_correlation(s.variant, s.theta1, s.theta2) -
                     analytic_correlation(s.variant, s.theta1, s.theta2p) +
                     analytic_correlation(s.variant, s.theta1p, s.theta2p) +
                     analytic_correlation(s.variant, s.theta1p, s.theta2);
    return std::abs(b);
}

// Finite-ensemble protocol behind the Table-1 style numbers: `sequences`
// independent lambda sequences of `sequence_length` trials each; every
// sequence produces its own normalized S's and a CHSH value, and the values
// are averaged. Short sequences reproduce the small-sample dip below
// 2*sqrt(2) seen in the reported maxima.
struct ChshEnsembleParams {
    std::int64_t sequences = 25000;
    std::int64_t sequence_length = 40;
    PhaseDistribution dist = PhaseDistribution::continuous();
    std::uint64_t seed = 0;
    int threads = 0;
};

inline CorrelationEstimate chsh_value(const ChshSettings& s, const ChshEnsembleParams& params) {
    if (params.sequences < 2) throw std::invalid_argument("chsh_value: sequences must be >= 2");
    if (params.sequence_length < 2)
        throw std::invalid_argument("chsh_value: sequence_length must be >= 2");

    constexpr std::int64_t kSeqChunk = 64;
    const std::int64_t n_chunks = (params.sequences + kSeqChunk - 1) / kSeqChunk;
    std::vector<ensemble::RunningMoments> stats(static_cast<std::size_t>(n_chunks));

    detail::run_chunked(params.sequences, params.threads, n_chunks, [&](std::int64_t c) {
        ensemble::TrialPhases trial;
        ensemble::RunningMoments acc;
        const std::int64_t begin = c * kSeqChunk;
        const std::int64_t end = std::min(params.sequences, begin + kSeqChunk);
        for (std::int64_t seq = begin; seq < end; ++seq) {
            double ab11 = 0, ab12 = 0, ab21 = 0, ab22 = 0;
            double a1sq = 0, a2sq = 0, b1sq = 0, b2sq = 0;
            for (std::int64_t k = 0; k < params.sequence_length; ++k) {
                const std::uint64_t t =
                    static_cast<std::uint64_t>(seq) * static_cast<std::uint64_t>(params.sequence_length) +
                    static_cast<std::uint64_t>(k);
                ensemble::sample_trial_phases_into(2, params.dist, {params.seed, t, 0}, trial);
                const double lambda = trial.differences[0];
                const double a1 = analyzer_a_reading(s.theta1, lambda);
                const double a2 = analyzer_a_reading(s.theta1p, lambda);
                const double b1 = analyzer_b_reading(s.variant, s.theta2, lambda);
                const double b2 = analyzer_b_reading(s.variant, s.theta2p, lambda);
                ab11 += a1 * b1;
                ab12 += a1 * b2;
                ab21 += a2 * b1;
                ab22 += a2 * b2;
                a1sq += a1 * a1;
                a2sq += a2 * a2;
                b1sq += b1 * b1;
                b2sq += b2 * b2;
            }
            const double s11 = ab11 / std::sqrt(a1sq * b1sq);
            const double s12 = ab12 / std::sqrt(a1sq * b2sq);
            const double s21 = ab21 / std::sqrt(a2sq * b1sq);
            const double s22 = ab22 / std::sqrt(a2sq * b2sq);
            acc.push(s11 - s12 + s22 + s21);
        }
        stats[static_cast<std::size_t>(c)] = acc;
    });

    ensemble::RunningMoments total;
    for (const auto& st : stats) total.merge(st);
    return {std::abs(total.mean), total.sample_variance(), total.count};
}

struct ChshOptimum {
    ChshSettings settings;
    double grid_abs_b = 0.0;  // best |B| on the scan lattice
    double max_abs_b = 0.0;   // after local refinement (or MC evaluation)
    bool violation = false;   // max_abs_b > 2
};

namespace detail {

// Compass search over the four angles, halving the step until 1e-12.
inline void refine_chsh(ChshSettings& s, double step, double& best) {
    while (step > 1e-12) {
        bool improved = false;
        double* coords[4] = {&s.theta1, &s.theta1p, &s.theta2, &s.theta2p};
        for (double* coord : coords) {
            const double saved = *coord;
            double coord_best = best;
            double coord_arg = saved;
            for (const double trial : {saved + step, saved - step}) {
                *coord = trial;
                const double v = chsh_value(s);
                if (v > coord_best) {
                    coord_best = v;
                    coord_arg = trial;
                }
            }
            *coord = coord_arg;
            if (coord_best > best) {
                best = coord_best;
                improved = true;
            }
        }
        if (!improved) step *= 0.5;
    }
}

}  // namespace detail

// Exhaustive lattice scan over the four angles (exploiting that B is
// separable in theta2 and theta2' for fixed theta1, theta1'), followed by
// compass refinement of the signed optimum.
inline ChshOptimum optimize_chsh(CorrelationVariant variant, double grid_step) {
    if (!(grid_step > 0.0)) throw std::invalid_argument("optimize_chsh: grid_step must be > 0");
    const auto m = static_cast<std::size_t>(std::max(1.0, std::floor(ensemble::kTwoPi / grid_step - 1e-9)) + 1);

    std::vector<double> angle(m);
    for (std::size_t i = 0; i < m; ++i) angle[i] = static_cast<double>(i) * grid_step;

    std::vector<double> corr(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) corr[i * m + j] = analytic_correlation(variant, angle[i], angle[j]);

    double best = -1.0;
    std::array<std::size_t, 4> arg{};  // i1, i1p, j2, j2p
    for (std::size_t i1 = 0; i1 < m; ++i1) {
        const double* row1 = corr.data() + i1 * m;
        for (std::size_t i1p = 0; i1p < m; ++i1p) {
            const double* row1p = corr.data() + i1p * m;
            double fmax = -4, fmin = 4, gmax = -4, gmin = 4;
            std::size_t jfmax = 0, jfmin = 0, jgmax = 0, jgmin = 0;
            for (std::size_t j = 0; j < m; ++j) {
                const double f = row1[j] + row1p[j];   // theta2 column
                const double g = row1p[j] - row1[j];   // theta2' column
                if (f > fmax) { fmax = f; jfmax = j; }
                if (f < fmin) { fmin = f; jfmin = j; }
                if (g > gmax) { gmax = g; jgmax = j; }
                if (g < gmin) { gmin = g; jgmin = j; }
            }
            const double bmax = fmax + gmax;
            const double bmin = fmin + gmin;
            if (bmax > best) {
                best = bmax;
                arg = {i1, i1p, jfmax, jgmax};
            }
            if (-bmin > best) {
                best = -bmin;
                arg = {i1, i1p, jfmin, jgmin};
            }
        }
    }

    ChshOptimum out;
    out.settings = {angle[arg[0]], angle[arg[1]], angle[arg[2]], angle[arg[3]], variant};
    out.grid_abs_b = best;
    out.max_abs_b = best;
    detail::refine_chsh(out.settings, grid_step * 0.5, out.max_abs_b);
    out.violation = out.max_abs_b > 2.0;
    return out;
}

// MC mode: the lattice search runs on the closed-form correlation, then the
// optimum is evaluated with the finite-ensemble estimator.
inline ChshOptimum optimize_chsh(CorrelationVariant variant, double grid_step,
                                 const ChshEnsembleParams& params) {
    ChshOptimum out = optimize_chsh(variant, grid_step);
    const CorrelationEstimate mc = chsh_value(out.settings, params);
    out.max_abs_b = mc.mean;
    out.violation = mc.mean > 2.0;
    return out;
}

// Three-analyzer correlation of the GHZ-like construction,
// S = <A(t1) B(t2) C(t3)> = cos(t1 + t2 + t3)/4 for the cyclic exchange.
inline double three_field_correlation(double theta1, double theta2, double theta3) {
    return 0.25 * std::cos(theta1 + theta2 + theta3);
}

inline CorrelationEstimate three_field_correlation(double theta1, double theta2, double theta3,
                                                   const McParams& params) {
    return ensemble::monte_carlo_average(
        [=](const ensemble::TrialPhases& trial) {
            return std::cos(theta1 + trial.differences[0]) * std::cos(theta2 + trial.differences[1]) *
                   std::cos(theta3 + trial.differences[2]);
        },
        3, params.dist, params.trials, params.seed, params.threads, params.trial_offset);
}

// N-analyzer correlation at common phase theta,
// S(theta) = cos(N theta)/2^{N-1}; `normalize` removes the 2^{N-1} factor.
inline double n_field_correlation(double theta, int n, bool normalize = false) {
    if (n < 1) throw std::invalid_argument("n_field_correlation: n must be >= 1");
    const double s = std::cos(static_cast<double>(n) * theta) / std::ldexp(1.0, n - 1);
    return normalize ? s * std::ldexp(1.0, n - 1) : s;
}

inline CorrelationEstimate n_field_correlation(double theta, int n, const McParams& params,
                                               bool normalize = false) {
    if (n < 1) throw std::invalid_argument("n_field_correlation: n must be >= 1");
    CorrelationEstimate est = ensemble::monte_carlo_average(
        [=](const ensemble::TrialPhases& trial) {
            double p = 1.0;
            for (double lambda : trial.differences) p *= std::cos(theta + lambda);
            return p;
        },
        static_cast<std::size_t>(n), params.dist, params.trials, params.seed, params.threads,
        params.trial_offset);
    if (normalize) {
        const double scale = std::ldexp(1.0, n - 1);
        est.mean *= scale;
        est.variance *= scale * scale;
    }
    return est;
}

}  // namespace modesim::correlation
