#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace modesim::bpm {

using Complex = std::complex<double>;

// z step too coarse for the index contrast: the per-step phase rotation
// exceeds the paraxial marching budget.
struct StepSizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A design request that cannot be met (e.g. no gap in range achieves the
// crosstalk threshold and the caller insists on running it anyway).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SlabGeometry {
    double n_core = 1.46;
    double n_clad = 1.45;
    double core_width = 0.0;
    double vacuum_wavelength = 1.55e-6;

    double k0() const { return 2.0 * std::numbers::pi / vacuum_wavelength; }

    // Normalized frequency (k0 d/2) sqrt(n_core^2 - n_clad^2); mode m cuts
    // off at m pi/2.
    double v_parameter() const {
        return 0.5 * k0() * core_width * std::sqrt(n_core * n_core - n_clad * n_clad);
    }

    bool weakly_guiding() const { return (n_core - n_clad) / n_clad <= 0.05; }

    void validate() const {
        if (!(n_clad > 0.0) || !(n_core > n_clad))
            throw std::invalid_argument("SlabGeometry: requires n_core > n_clad > 0");
        if (!(core_width > 0.0)) throw std::invalid_argument("SlabGeometry: core_width must be > 0");
        if (!(vacuum_wavelength > 0.0))
            throw std::invalid_argument("SlabGeometry: vacuum_wavelength must be > 0");
    }

    // Core width giving a requested V at fixed indices and wavelength.
    static SlabGeometry with_v(double n_core, double n_clad, double vacuum_wavelength, double v) {
        SlabGeometry g{n_core, n_clad, 1.0, vacuum_wavelength};
        g.validate();
        if (!(v > 0.0)) throw std::invalid_argument("SlabGeometry: V must be > 0");
        g.core_width = v * vacuum_wavelength / (std::numbers::pi * std::sqrt(n_core * n_core - n_clad * n_clad));
        return g;
    }
};

struct AbsorbingBoundary {
    double fraction = 0.1;   // of the window width, per side
    double strength = 2e4;   // peak amplitude decay rate, 1/m
};

// Transverse grid with cell-centered samples: x_i = x_min + (i + 1/2) dx.
// A symmetric window then has no sample at x = 0 and even/odd products sum
// to zero exactly.
struct BpmGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    int nx = 1024;
    double dz = 1e-6;
    double reference_index = 0.0;  // 0 = derive from the index profile
    AbsorbingBoundary boundary;

    double dx() const { return (x_max - x_min) / nx; }
    double x_at(int i) const { return x_min + (i + 0.5) * dx(); }

    void validate() const {
        if (nx < 128) throw std::invalid_argument("BpmGrid: nx must be >= 128");
        if (!(x_max > x_min)) throw std::invalid_argument("BpmGrid: x_max must exceed x_min");
        if (!(dz > 0.0)) throw std::invalid_argument("BpmGrid: dz must be > 0");
        if (boundary.fraction < 0.0 || boundary.fraction >= 0.5)
            throw std::invalid_argument("BpmGrid: boundary fraction must be in [0, 0.5)");
    }
};

enum class Parity { even, odd };

// Grid-free solution of the symmetric-slab TE dispersion relation for one
// guided mode: u = kappa d/2, w = gamma d/2 with u^2 + w^2 = V^2.
struct ModeSolution {
    int order = 0;
    Parity parity = Parity::even;
    double u = 0.0;
    double w = 0.0;
    double n_eff = 0.0;
    double beta = 0.0;
    double residual = 0.0;
};

struct ModeProfile {
    int order = 0;
    Parity parity = Parity::even;
    double n_eff = 0.0;
    double beta = 0.0;
    double residual = 0.0;
    std::vector<double> samples;  // discrete L2-normalized: sum s^2 dx = 1
};

namespace detail {

// Even branches satisfy u tan u = w, odd branches -u cot u = w; both left
// sides are positive and increasing on branch m.
inline double dispersion_residual(double u, double v, int m) {
    const double w = std::sqrt(std::max(0.0, v * v - u * u));
    const double lhs = (m % 2 == 0) ? u * std::tan(u) : -u / std::tan(u);
    return lhs - w;
}

inline double solve_branch(double v, int m) {
    const double half_pi = 0.5 * std::numbers::pi;
    double lo = m * half_pi;
    double hi = std::min((m + 1) * half_pi, v);
    const double nudge = (hi - lo) * 1e-12;
    lo += nudge;
    hi -= nudge;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dispersion_residual(mid, v, m) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline std::vector<ModeSolution> solve_slab_parameters(const SlabGeometry& geom) {
    geom.validate();
    const double v = geom.v_parameter();
    const double k0 = geom.k0();
    std::vector<ModeSolution> out;
    for (int m = 0; m * 0.5 * std::numbers::pi < v; ++m) {
        ModeSolution sol;
        sol.order = m;
        sol.parity = (m % 2 == 0) ? Parity::even : Parity::odd;
        sol.u = detail::solve_branch(v, m);
        sol.w = std::sqrt(v * v - sol.u * sol.u);
        const double kappa = 2.0 * sol.u / geom.core_width;
        sol.beta = std::sqrt(k0 * k0 * geom.n_core * geom.n_core - kappa * kappa);
        sol.n_eff = sol.beta / k0;
        sol.residual = std::abs(detail::dispersion_residual(sol.u, v, m));
        out.push_back(sol);
    }
    return out;
}

// Closed-form transverse shape with unit core amplitude, centered at x = 0.
inline double mode_shape_unnormalized(const SlabGeometry& geom, const ModeSolution& sol, double x) {
    const double half = 0.5 * geom.core_width;
    const double kappa = 2.0 * sol.u / geom.core_width;
    const double gamma = 2.0 * sol.w / geom.core_width;
    const double ax = std::abs(x);
    if (sol.parity == Parity::even) {
        if (ax <= half) return std::cos(kappa * x);
        return std::cos(sol.u) * std::exp(-gamma * (ax - half));
    }
    if (ax <= half) return std::sin(kappa * x);
    const double tail = std::sin(sol.u) * std::exp(-gamma * (ax - half));
    return x >= 0.0 ? tail : -tail;
}

// Continuous L2 norm of the unit-core-amplitude shape.
inline double mode_shape_norm(const SlabGeometry& geom, const ModeSolution& sol) {
    const double half = 0.5 * geom.core_width;
    const double kappa = 2.0 * sol.u / geom.core_width;
    const double gamma = 2.0 * sol.w / geom.core_width;
    double core, clad;
    if (sol.parity == Parity::even) {
        core = half + std::sin(2.0 * sol.u) / (2.0 * kappa);
        clad = std::cos(sol.u) * std::cos(sol.u) / gamma;
    } else {
        core = half - std::sin(2.0 * sol.u) / (2.0 * kappa);
        clad = std::sin(sol.u) * std::sin(sol.u) / gamma;
    }
    return std::sqrt(core + clad);
}

// Continuous-normalized shape evaluated anywhere; used for coupled-mode
// overlap integrals where grid sampling would limit accuracy.
inline double mode_shape(const SlabGeometry& geom, const ModeSolution& sol, double x) {
    return mode_shape_unnormalized(geom, sol, x) / mode_shape_norm(geom, sol);
}

// Grid samples of a mode centered at `center`, renormalized in the discrete
// inner product so that mode_overlap(self, self) = 1 exactly.
inline std::vector<double> sample_mode(const SlabGeometry& geom, const ModeSolution& sol,
                                       const BpmGrid& grid, double center = 0.0) {
    std::vector<double> s(static_cast<std::size_t>(grid.nx));
    const double dx = grid.dx();
    double norm2 = 0.0;
    for (int i = 0; i < grid.nx; ++i) {
        s[static_cast<std::size_t>(i)] = mode_shape_unnormalized(geom, sol, grid.x_at(i) - center);
        norm2 += s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)] * dx;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : s) v *= inv;
    return s;
}

inline std::vector<ModeProfile> solve_slab_modes(const SlabGeometry& geom, const BpmGrid& grid) {
    grid.validate();
    const std::vector<ModeSolution> sols = solve_slab_parameters(geom);
    // The window must hold the core plus at least 5 decay lengths of the
    // widest (slowest-decaying) mode.
    const double gamma_min = 2.0 * sols.back().w / geom.core_width;
    const double needed = 0.5 * geom.core_width + 5.0 / gamma_min;
    if (std::min(-grid.x_min, grid.x_max) < needed)
        throw std::invalid_argument("solve_slab_modes: grid too narrow for the widest mode");

    std::vector<ModeProfile> out;
    out.reserve(sols.size());
    for (const auto& sol : sols) {
        ModeProfile p;
        p.order = sol.order;
        p.parity = sol.parity;
        p.n_eff = sol.n_eff;
        p.beta = sol.beta;
        p.residual = sol.residual;
        p.samples = sample_mode(geom, sol, grid);
        out.push_back(std::move(p));
    }
    return out;
}

inline Complex mode_overlap(const std::vector<double>& mode, const std::vector<Complex>& field,
                            double dx) {
    if (mode.size() != field.size())
        throw std::invalid_argument("mode_overlap: grid size mismatch");
    Complex acc = 0.0;
    for (std::size_t i = 0; i < mode.size(); ++i) acc += mode[i] * field[i];
    return acc * dx;
}

inline Complex mode_overlap(const ModeProfile& mode, const std::vector<Complex>& field,
                            const BpmGrid& grid) {
    return mode_overlap(mode.samples, field, grid.dx());
}

inline double total_power(const std::vector<Complex>& field, double dx) {
    double acc = 0.0;
    for (const auto& c : field) acc += std::norm(c);
    return acc * dx;
}

// Index profile of parallel identical cores. Cells straddling an interface
// get the volume-average of n^2, which keeps the discretization error of
// the sharp profile at second order in dx.
inline std::vector<double> guide_index_profile(const SlabGeometry& geom, const BpmGrid& grid,
                                               const std::vector<double>& centers) {
    geom.validate();
    grid.validate();
    const double dx = grid.dx();
    const double half = 0.5 * geom.core_width;
    std::vector<double> n(static_cast<std::size_t>(grid.nx), geom.n_clad);
    for (int i = 0; i < grid.nx; ++i) {
        const double lo = grid.x_at(i) - 0.5 * dx;
        const double hi = grid.x_at(i) + 0.5 * dx;
        double inside = 0.0;
        for (const double c : centers)
            inside += std::max(0.0, std::min(hi, c + half) - std::max(lo, c - half));
        const double f = std::clamp(inside / dx, 0.0, 1.0);
        n[static_cast<std::size_t>(i)] =
            std::sqrt(f * geom.n_core * geom.n_core + (1.0 - f) * geom.n_clad * geom.n_clad);
    }
    return n;
}

inline std::vector<double> single_guide_index(const SlabGeometry& geom, const BpmGrid& grid) {
    return guide_index_profile(geom, grid, {0.0});
}

// Two cores separated edge-to-edge by `gap`, centered symmetrically.
inline std::vector<double> coupler_index_profile(const SlabGeometry& geom, const BpmGrid& grid,
                                                 double gap) {
    if (!(gap > 0.0)) throw std::invalid_argument("coupler_index_profile: gap must be > 0");
    const double c = 0.5 * (gap + geom.core_width);
    return guide_index_profile(geom, grid, {-c, c});
}

struct Snapshot {
    double z = 0.0;
    std::vector<Complex> field;
};

struct PropagationResult {
    std::vector<Complex> field;  // includes the reference carrier phase
    std::vector<Snapshot> snapshots;
    double z_total = 0.0;
    int steps = 0;
    double dz = 0.0;
};

// Crank-Nicolson march of the paraxial envelope
//   du/dz = i/(2 beta_ref) d2u/dx2 + i (k0^2 n^2 - beta_ref^2)/(2 beta_ref) u - sigma(x) u
// with Dirichlet ends behind a quadratic-ramp absorber. The returned field
// carries the full phase (envelope times e^{i beta_ref z}), so eigenmode
// projections accumulate arg = beta_m z directly.
inline PropagationResult bpm_propagate(const std::vector<Complex>& input,
                                       const std::vector<double>& index, const SlabGeometry& geom,
                                       const BpmGrid& grid, double z_total, int snapshot_stride = 0) {
    grid.validate();
    const auto nx = static_cast<std::size_t>(grid.nx);
    if (input.size() != nx || index.size() != nx)
        throw std::invalid_argument("bpm_propagate: field/index size must match grid");
    if (!(z_total > 0.0)) throw std::invalid_argument("bpm_propagate: z_total must be > 0");
    if (total_power(input, grid.dx()) <= 0.0)
        throw std::invalid_argument("bpm_propagate: input field is zero");

    const double k0 = geom.k0();
    double n_ref = grid.reference_index;
    if (n_ref <= 0.0) {
        const auto [lo, hi] = std::minmax_element(index.begin(), index.end());
        n_ref = 0.5 * (*lo + *hi);
    }
    const double beta_ref = k0 * n_ref;

    const int steps = std::max(1, static_cast<int>(std::llround(z_total / grid.dz)));
    const double dz = z_total / steps;

    // Per-step potential rotation must stay well inside a radian.
    double max_rot = 0.0;
    for (const double n : index)
        max_rot = std::max(max_rot, std::abs(k0 * k0 * n * n - beta_ref * beta_ref) / (2.0 * beta_ref) * dz);
    if (max_rot > 0.5)
        throw StepSizeError("bpm_propagate: dz too coarse, per-step phase " + std::to_string(max_rot) +
                            " rad exceeds 0.5");

    const double dx = grid.dx();
    const double window = grid.x_max - grid.x_min;
    const double absorb_width = grid.boundary.fraction * window;

    const Complex off = Complex(0.0, 1.0) * (0.5 * dz) / (2.0 * beta_ref * dx * dx);
    std::vector<Complex> diag_plus(nx), diag_minus(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        const double n = index[j];
        double sigma = 0.0;
        if (absorb_width > 0.0) {
            const double edge = std::min(grid.x_at(static_cast<int>(j)) - grid.x_min,
                                         grid.x_max - grid.x_at(static_cast<int>(j)));
            if (edge < absorb_width) {
                const double t = 1.0 - edge / absorb_width;
                sigma = grid.boundary.strength * t * t;
            }
        }
        const Complex half_l_diag =
            -2.0 * off +
            Complex(0.0, 1.0) * (0.5 * dz) * ((k0 * k0 * n * n - beta_ref * beta_ref) / (2.0 * beta_ref)) -
            Complex(0.5 * dz * sigma, 0.0);
        diag_plus[j] = 1.0 + half_l_diag;
        diag_minus[j] = 1.0 - half_l_diag;
    }

    // Thomas elimination coefficients for the constant left-hand matrix.
    std::vector<Complex> cprime(nx), inv_denom(nx);
    {
        Complex denom = diag_minus[0];
        inv_denom[0] = 1.0 / denom;
        cprime[0] = -off * inv_denom[0];
        for (std::size_t j = 1; j < nx; ++j) {
            denom = diag_minus[j] - (-off) * cprime[j - 1];
            inv_denom[j] = 1.0 / denom;
            cprime[j] = -off * inv_denom[j];
        }
    }

    PropagationResult result;
    result.steps = steps;
    result.dz = dz;
    result.z_total = z_total;

    std::vector<Complex> psi = input;
    std::vector<Complex> rhs(nx), work(nx);

    auto record = [&](int step) {
        if (snapshot_stride <= 0) return;
        if (step % snapshot_stride != 0 && step != steps) return;
        const double z = step * dz;
        Snapshot snap;
        snap.z = z;
        snap.field = psi;
        const Complex carrier = std::polar(1.0, beta_ref * z);
        for (auto& c : snap.field) c *= carrier;
        result.snapshots.push_back(std::move(snap));
    };

    record(0);
    for (int step = 1; step <= steps; ++step) {
        for (std::size_t j = 0; j < nx; ++j) {
            Complex acc = diag_plus[j] * psi[j];
            if (j > 0) acc += off * psi[j - 1];
            if (j + 1 < nx) acc += off * psi[j + 1];
            rhs[j] = acc;
        }
        work[0] = rhs[0] * inv_denom[0];
        for (std::size_t j = 1; j < nx; ++j)
            work[j] = (rhs[j] - (-off) * work[j - 1]) * inv_denom[j];
        psi[nx - 1] = work[nx - 1];
        for (std::size_t j = nx - 1; j-- > 0;) psi[j] = work[j] - cprime[j] * psi[j + 1];
        record(step);
    }

    const Complex carrier = std::polar(1.0, beta_ref * z_total);
    for (auto& c : psi) c *= carrier;
    result.field = std::move(psi);
    return result;
}

struct CouplerDesign {
    double gap = 0.0;
    double length = 0.0;
    double kappa0 = 0.0;
    double kappa1 = 0.0;
    double predicted_te1_transfer = 0.0;
    double predicted_te0_crosstalk = 1.0;
    bool feasible = false;
};

struct GapRange {
    double min = 8e-6;
    double max = 16e-6;
    int points = 33;
};

namespace detail {

// Coupled-mode coefficient of mode m between two identical guides at
// center separation s: kappa = k0^2 (n_core^2 - n_clad^2) / (2 beta)
// integral over one core of the two (continuous-normalized) shifted shapes.
// The perturbation n^2 - n_iso^2 is nonzero only over the partner core, so
// one shape contributes its evanescent tail there.
inline double coupled_mode_kappa(const SlabGeometry& geom, const ModeSolution& sol, double separation) {
    const double half = 0.5 * geom.core_width;
    constexpr int kPoints = 4001;
    const double a = -half, b = half;
    const double h = (b - a) / (kPoints - 1);
    double acc = 0.0;
    for (int i = 0; i < kPoints; ++i) {
        const double x = a + i * h;
        const double f = mode_shape(geom, sol, x) * mode_shape(geom, sol, x + separation);
        acc += (i == 0 || i == kPoints - 1) ? 0.5 * f : f;
    }
    const double integral = acc * h;
    const double k0 = geom.k0();
    return std::abs(k0 * k0 * (geom.n_core * geom.n_core - geom.n_clad * geom.n_clad) /
                    (2.0 * sol.beta) * integral);
}

}  // namespace detail

// Scans the gap range, predicts kappa_0/kappa_1 from coupled-mode overlap
// integrals, sets the length to one TE1 coupling length L = pi/(2 kappa_1)
// and picks the gap with the lowest predicted TE0 crosstalk sin^2(kappa_0 L).
inline CouplerDesign design_coupler(const SlabGeometry& geom, const GapRange& gaps,
                                    double crosstalk_threshold = 0.005) {
    geom.validate();
    if (!(gaps.min > 0.0) || !(gaps.max >= gaps.min) || gaps.points < 1)
        throw std::invalid_argument("design_coupler: invalid gap range");
    const std::vector<ModeSolution> sols = solve_slab_parameters(geom);
    if (sols.size() != 2)
        throw std::invalid_argument("design_coupler: geometry must guide exactly TE0 and TE1");

    CouplerDesign best;
    best.predicted_te0_crosstalk = 2.0;
    for (int i = 0; i < gaps.points; ++i) {
        const double gap =
            gaps.points == 1 ? gaps.min
                             : gaps.min + (gaps.max - gaps.min) * i / static_cast<double>(gaps.points - 1);
        const double separation = gap + geom.core_width;
        const double kappa0 = detail::coupled_mode_kappa(geom, sols[0], separation);
        const double kappa1 = detail::coupled_mode_kappa(geom, sols[1], separation);
        const double length = std::numbers::pi / (2.0 * kappa1);
        const double transfer = std::pow(std::sin(kappa1 * length), 2);
        const double crosstalk = std::pow(std::sin(kappa0 * length), 2);
        if (crosstalk < best.predicted_te0_crosstalk)
            best = {gap, length, kappa0, kappa1, transfer, crosstalk, false};
    }
    best.feasible = best.predicted_te0_crosstalk <= crosstalk_threshold;
    return best;
}

struct ArmPowers {
    double z = 0.0;
    double a_te0 = 0.0;
    double a_te1 = 0.0;
    double b_te0 = 0.0;
    double b_te1 = 0.0;
    double total = 0.0;
};

struct Fig1Result {
    CouplerDesign design;
    std::vector<Snapshot> snapshots;      // mixed launch
    std::vector<ArmPowers> power_series;  // mixed launch
    double te1_transfer = 0.0;    // pure TE1 launch: power in arm-B TE1 at z = L
    double te0_crosstalk = 0.0;   // pure TE0 launch: power missing from arm-A TE0 at z = L
    double arm_a_purity = 0.0;    // mixed launch: TE0 fraction of arm-A power at z = L
    double arm_b_purity = 0.0;    // mixed launch: TE1 fraction of arm-B power at z = L
    double reference_index = 0.0;
};

// End-to-end mode-separation run: launch into arm A of the designed
// two-guide coupler, record snapshots and per-arm modal powers, and verify
// with pure launches that TE1 fully migrates while TE0 stays put.
inline Fig1Result simulate_fig1(const CouplerDesign& design, const SlabGeometry& geom, BpmGrid grid,
                                int snapshot_count = 100) {
    if (!design.feasible)
        throw InfeasibleError("simulate_fig1: design infeasible (predicted crosstalk " +
                              std::to_string(design.predicted_te0_crosstalk) + ")");
    geom.validate();
    grid.validate();

    const std::vector<ModeSolution> sols = solve_slab_parameters(geom);
    if (sols.size() != 2)
        throw std::invalid_argument("simulate_fig1: geometry must guide exactly TE0 and TE1");
    const double center = 0.5 * (design.gap + geom.core_width);
    const double gamma1 = 2.0 * sols[1].w / geom.core_width;
    const double usable = (0.5 - grid.boundary.fraction) * (grid.x_max - grid.x_min);
    if (usable < center + 0.5 * geom.core_width + 5.0 / gamma1)
        throw std::invalid_argument("simulate_fig1: window too narrow for the coupler plus mode tails");
    if (grid.reference_index <= 0.0) grid.reference_index = 0.5 * (sols[0].n_eff + sols[1].n_eff);

    const std::vector<double> index = coupler_index_profile(geom, grid, design.gap);
    const double dx = grid.dx();

    const std::vector<double> a0 = sample_mode(geom, sols[0], grid, -center);
    const std::vector<double> a1 = sample_mode(geom, sols[1], grid, -center);
    const std::vector<double> b0 = sample_mode(geom, sols[0], grid, center);
    const std::vector<double> b1 = sample_mode(geom, sols[1], grid, center);

    const auto nx = static_cast<std::size_t>(grid.nx);
    auto to_field = [&](const std::vector<double>& re) {
        std::vector<Complex> f(nx);
        for (std::size_t i = 0; i < nx; ++i) f[i] = re[i];
        return f;
    };

    // Mixed launch (TE0 + TE1)/sqrt(2) in arm A, with snapshots.
    std::vector<Complex> mixed(nx);
    {
        const double inv = 1.0 / std::sqrt(2.0);
        for (std::size_t i = 0; i < nx; ++i) mixed[i] = inv * (a0[i] + a1[i]);
        const double p = total_power(mixed, dx);
        for (auto& c : mixed) c /= std::sqrt(p);
    }
    const int stride = std::max(1, static_cast<int>(std::llround(design.length / grid.dz)) /
                                       std::max(1, snapshot_count));
    PropagationResult mixed_run = bpm_propagate(mixed, index, geom, grid, design.length, stride);

    Fig1Result out;
    out.design = design;
    out.reference_index = grid.reference_index;
    out.snapshots = std::move(mixed_run.snapshots);
    for (const auto& snap : out.snapshots) {
        ArmPowers row;
        row.z = snap.z;
        row.a_te0 = std::norm(mode_overlap(a0, snap.field, dx));
        row.a_te1 = std::norm(mode_overlap(a1, snap.field, dx));
        row.b_te0 = std::norm(mode_overlap(b0, snap.field, dx));
        row.b_te1 = std::norm(mode_overlap(b1, snap.field, dx));
        row.total = total_power(snap.field, dx);
        out.power_series.push_back(row);
    }

    double power_a = 0.0, power_b = 0.0;
    const auto& final_field = mixed_run.field;
    for (std::size_t i = 0; i < nx; ++i) {
        const double p = std::norm(final_field[i]) * dx;
        (grid.x_at(static_cast<int>(i)) < 0.0 ? power_a : power_b) += p;
    }
    out.arm_a_purity = power_a > 0.0 ? std::norm(mode_overlap(a0, final_field, dx)) / power_a : 0.0;
    out.arm_b_purity = power_b > 0.0 ? std::norm(mode_overlap(b1, final_field, dx)) / power_b : 0.0;

    // Pure launches quantify transfer and crosstalk at the designed length.
    PropagationResult te1_run = bpm_propagate(to_field(a1), index, geom, grid, design.length);
    out.te1_transfer = std::norm(mode_overlap(b1, te1_run.field, dx));
    PropagationResult te0_run = bpm_propagate(to_field(a0), index, geom, grid, design.length);
    out.te0_crosstalk = 1.0 - std::norm(mode_overlap(a0, te0_run.field, dx));
    return out;
}

}  // namespace modesim::bpm
