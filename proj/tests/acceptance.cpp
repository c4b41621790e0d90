// Acceptance suite: one criterion per line, nonzero exit if any fails.
// Every Monte Carlo check is seed-pinned, so a pass is reproducible.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "modesim/modesim.hpp"

namespace ens = modesim::ensemble;
namespace corr = modesim::correlation;
namespace met = modesim::metrology;
namespace bpm = modesim::bpm;
namespace cfg = modesim::config;
namespace runner = modesim::runner;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRoot2 = std::numbers::sqrt2;

struct Criterion {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct TimeLimit {
    double seconds = 0.0;  // 0 = unlimited
};

class Check {
public:
    explicit Check(std::ostringstream& detail) : detail_(detail) {}

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass_ = false;
            if (!failures_.empty()) failures_ += "; ";
            failures_ += what;
        }
    }

    void note(const std::string& what) {
        if (!detail_.str().empty()) detail_ << ", ";
        detail_ << what;
    }

    bool pass() const { return pass_; }
    const std::string& failures() const { return failures_; }

private:
    std::ostringstream& detail_;
    bool pass_ = true;
    std::string failures_;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

template <typename Fn>
Criterion run_criterion(int id, const std::string& name, TimeLimit limit, Fn&& fn) {
    Criterion c;
    c.id = id;
    c.name = name;
    std::ostringstream detail;
    Check check(detail);
    const auto start = std::chrono::steady_clock::now();
    try {
        fn(check);
        c.pass = check.pass();
        if (!c.pass) detail << (detail.str().empty() ? "" : ", ") << "FAILED: " << check.failures();
    } catch (const std::exception& e) {
        c.pass = false;
        detail << (detail.str().empty() ? "" : ", ") << "exception: " << e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit.seconds > 0.0 && c.seconds > limit.seconds) {
        c.pass = false;
        detail << (detail.str().empty() ? "" : ", ") << "over time limit " << fmt(limit.seconds) << " s";
    }
    c.detail = detail.str();
    return c;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "modesim_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------

void two_field_sampling(Check& check) {
    modesim::rng::PhiloxStream angles({2024, 0, 0});
    double max_err = 0.0, max_sigma = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double t1 = angles.next_double() * ens::kTwoPi;
        const double t2 = angles.next_double() * ens::kTwoPi;
        corr::McParams params;
        params.trials = 100000;
        params.seed = 101;
        params.trial_offset = static_cast<std::uint64_t>(i) * met::kCellStride;
        const auto est = corr::two_field_correlation(t1, t2, params);
        const double err = std::abs(est.mean - std::cos(t1 + t2));
        max_err = std::max(max_err, err);
        max_sigma = std::max(max_sigma, err / est.std_error());
        check.require(err <= 5.0 * est.std_error(), "pair " + std::to_string(i) + " err > 5 se");
        check.require(err <= 0.02, "pair " + std::to_string(i) + " err > 0.02");
    }
    check.note("max|err| " + fmt(max_err));
    check.note("max err/se " + fmt(max_sigma));
}

void chsh_optimum(Check& check) {
    const std::vector<corr::CorrelationVariant> variants{
        corr::CorrelationVariant::cos_sum, corr::CorrelationVariant::cos_diff,
        corr::CorrelationVariant::neg_cos_sum, corr::CorrelationVariant::neg_cos_diff};

    double worst_grid = 0.0;
    for (const auto v : variants) {
        const auto o = corr::optimize_chsh(v, kPi / 46.0);
        worst_grid = std::max(worst_grid, std::abs(o.grid_abs_b - 2.0 * kRoot2));
        check.require(std::abs(o.grid_abs_b - 2.0 * kRoot2) <= 0.01, "lattice |B| off by > 0.01");
        check.require(o.violation, "no violation reported");
    }
    check.note("max lattice gap " + fmt(worst_grid));

    corr::ChshEnsembleParams params;  // 25000 sequences of 40 trials
    params.seed = 202;
    double lo = 4.0, hi = 0.0;
    for (const auto v : variants) {
        const auto o = corr::optimize_chsh(v, kPi / 46.0, params);
        lo = std::min(lo, o.max_abs_b);
        hi = std::max(hi, o.max_abs_b);
        check.require(o.max_abs_b >= 2.79 && o.max_abs_b <= 2.8285,
                      "ensemble |B| outside [2.79, 2.8285]");
    }
    check.note("ensemble |B| in [" + fmt(lo) + ", " + fmt(hi) + "]");
}

void density_reduction(Check& check) {
    corr::DensityMatrix4 expected;
    for (std::size_t d = 0; d < 4; ++d) expected(d, d) = 0.25;
    expected(0, 3) = 0.25;
    expected(3, 0) = 0.25;

    const auto reduced = corr::ensemble_reduce_density(ens::PhaseDistribution::continuous());
    check.require(reduced.rho.max_abs_diff(expected) == 0.0, "analytic reduction not exact");

    const double gap = corr::inseparability_gap(reduced.rho);
    check.require(std::abs(gap - kRoot2 / 4.0) <= 1e-12, "inseparability gap off");
    check.note("gap err " + fmt(std::abs(gap - kRoot2 / 4.0)));

    corr::McParams params;
    params.trials = 1000000;
    params.seed = 303;
    const auto mc = corr::mc_average_density(params);
    const double diff = mc.max_abs_diff(expected);
    check.require(diff <= 3e-3, "sampled matrix off by > 3e-3");
    check.note("mc max err " + fmt(diff));
}

void three_field_sampling(Check& check) {
    modesim::rng::PhiloxStream angles({2025, 0, 0});
    double max_sigma = 0.0;
    for (int i = 0; i < 10; ++i) {
        const double t1 = angles.next_double() * ens::kTwoPi;
        const double t2 = angles.next_double() * ens::kTwoPi;
        const double t3 = angles.next_double() * ens::kTwoPi;
        corr::McParams params;
        params.trials = 100000;
        params.seed = 404;
        params.trial_offset = static_cast<std::uint64_t>(i) * met::kCellStride;
        const auto est = corr::three_field_correlation(t1, t2, t3, params);
        const double err = std::abs(est.mean - 0.25 * std::cos(t1 + t2 + t3));
        max_sigma = std::max(max_sigma, err / est.std_error());
        check.require(err <= 5.0 * est.std_error(), "triple " + std::to_string(i) + " err > 5 se");
    }
    check.note("max err/se " + fmt(max_sigma));
}

void super_resolution(Check& check) {
    const std::size_t points = 64;
    std::vector<double> grid(points);
    for (std::size_t j = 0; j < points; ++j)
        grid[j] = ens::kTwoPi * static_cast<double>(j) / static_cast<double>(points);

    double worst_rel = 0.0;
    for (int n = 1; n <= 8; ++n) {
        std::vector<double> analytic(points), sampled(points);
        for (std::size_t j = 0; j < points; ++j) {
            analytic[j] = corr::n_field_correlation(grid[j], n);
            corr::McParams params;
            params.trials = 100000;
            params.seed = 505;
            params.trial_offset =
                (static_cast<std::uint64_t>(n) * points + j) * met::kCellStride;
            sampled[j] = corr::n_field_correlation(grid[j], n, params).mean;
        }
        const auto fa = met::dominant_fringe(analytic);
        check.require(fa.dominant_frequency == n, "analytic peak not at n");
        check.require(std::abs(fa.amplitude - std::ldexp(1.0, 1 - n)) <= 1e-12 * std::ldexp(1.0, 1 - n) + 1e-15,
                      "analytic amplitude off");
        const auto fm = met::dominant_fringe(sampled);
        check.require(fm.dominant_frequency == n, "sampled peak not at n");
        const double rel = std::abs(fm.amplitude - std::ldexp(1.0, 1 - n)) / std::ldexp(1.0, 1 - n);
        worst_rel = std::max(worst_rel, rel);
        check.require(rel <= 0.05, "sampled amplitude off by > 5% at n=" + std::to_string(n));
    }
    check.note("worst amplitude rel err " + fmt(worst_rel));
}

void telescoping(Check& check) {
    const auto dist = ens::PhaseDistribution::continuous();
    const int cycle[4] = {2, 3, 5, 8};
    double worst = 0.0;
    ens::TrialPhases trial;
    for (std::uint64_t t = 0; t < 1000000; ++t) {
        ens::sample_trial_phases_into(static_cast<std::size_t>(cycle[t % 4]), dist, {606, t, 0}, trial);
        double sum = 0.0;
        for (const double l : trial.differences) sum += l;
        const double r = ens::mod_two_pi(sum);
        worst = std::max(worst, std::min(r, ens::kTwoPi - r));
    }
    check.require(worst <= 1e-12, "telescoping residual > 1e-12");
    check.note("worst residual " + fmt(worst));
}

void metrology_claims(Check& check) {
    double worst = 0.0;
    for (int n = 1; n <= 20; ++n) {
        const double err = std::abs(met::heisenberg_phase_error(n) * n - 1.0);
        worst = std::max(worst, err);
        check.require(err <= 1e-12, "phase error * n != 1 at n=" + std::to_string(n));
        check.require(met::sql_phase_error(n) == 1.0 / std::sqrt(static_cast<double>(n)),
                      "baseline not exactly 1/sqrt(n)");
    }
    check.note("max |n dtheta - 1| " + fmt(worst));

    // The empirical variance follows the telescoping-constrained closed form.
    const double theta = 0.3;
    double worst_sigma = 0.0;
    for (int n = 2; n <= 6; ++n) {
        const auto m = ens::monte_carlo_moments(
            [=](const ens::TrialPhases& trial) {
                double p = 1.0;
                for (const double l : trial.differences) p *= std::cos(theta + l);
                return p;
            },
            static_cast<std::size_t>(n), ens::PhaseDistribution::continuous(), 200000, 707, 0,
            static_cast<std::uint64_t>(n) * met::kCellStride);
        const double expected = met::derived_variance(n, theta, met::VarianceModel::cyclic);
        const double err = std::abs(m.sample_variance() - expected);
        worst_sigma = std::max(worst_sigma, err / m.variance_std_error());
        check.require(err <= 3.0 * m.variance_std_error(),
                      "variance off by > 3 se at n=" + std::to_string(n));
    }
    check.note("max variance err/se " + fmt(worst_sigma));
}

void variance_oracle(Check& check) {
    const double theta = 0.4;
    const int pts = 64;
    double mean = 0.0, second = 0.0;
    for (int j = 0; j < pts; ++j) {
        const double lambda = ens::kTwoPi * j / pts;
        const double p = 0.5 * (std::cos(2.0 * theta) + std::cos(2.0 * lambda));
        mean += p;
        second += p * p;
    }
    mean /= pts;
    second /= pts;
    const double variance = second - mean * mean;
    check.require(std::abs(mean - 0.5 * std::cos(2.0 * theta)) <= 1e-12, "quadrature mean off");
    check.require(std::abs(variance - 0.125) <= 1e-12, "quadrature variance != 1/8");
    check.note("quadrature var err " + fmt(std::abs(variance - 0.125)));

    const auto m = ens::monte_carlo_moments(
        [=](const ens::TrialPhases& trial) {
            return std::cos(theta + trial.differences[0]) * std::cos(theta + trial.differences[1]);
        },
        2, ens::PhaseDistribution::continuous(), 100000, 808);
    const double mean_se = std::sqrt(m.sample_variance() / static_cast<double>(m.count));
    check.require(std::abs(m.mean - 0.5 * std::cos(2.0 * theta)) <= 3.0 * mean_se,
                  "sampled mean off by > 3 se");
    check.require(std::abs(m.sample_variance() - 0.125) <= 3.0 * m.variance_std_error(),
                  "sampled variance off by > 3 se");
    check.note("mc mean err/se " + fmt(std::abs(m.mean - 0.5 * std::cos(2.0 * theta)) / mean_se));
}

void waveguide_engine(Check& check) {
    const cfg::BpmConfig defaults;  // nx = 1024, dz = 1 um, gap scan 8..16 um
    const bpm::SlabGeometry geom = runner::detail::geometry_from(defaults);

    const auto sols = bpm::solve_slab_parameters(geom);
    check.require(sols.size() == 2, "expected exactly two guided modes");
    double max_residual = 0.0;
    for (const auto& s : sols) max_residual = std::max(max_residual, s.residual);
    check.require(max_residual < 1e-12, "dispersion residual >= 1e-12");
    check.note("max residual " + fmt(max_residual));

    // Eigenmode self-propagation stays pure over 1 mm.
    bpm::BpmGrid grid = runner::detail::grid_from(defaults, geom, 0.5 * geom.core_width);
    const auto modes = bpm::solve_slab_modes(geom, grid);
    const auto index = bpm::single_guide_index(geom, grid);
    std::vector<bpm::Complex> input(modes[0].samples.begin(), modes[0].samples.end());
    const auto pure_run = bpm::bpm_propagate(input, index, geom, grid, 1e-3);
    const double purity = std::norm(bpm::mode_overlap(modes[0], pure_run.field, grid));
    check.require(purity >= 0.999, "self-propagation purity < 0.999");
    check.note("purity " + fmt(purity));

    // Beat length of the two-mode interference against 2 pi / delta beta.
    bpm::BpmGrid beat_grid = grid;
    beat_grid.reference_index = 0.5 * (modes[0].n_eff + modes[1].n_eff);
    const double beat = ens::kTwoPi / (modes[0].beta - modes[1].beta);
    std::vector<bpm::Complex> mixed(input.size());
    for (std::size_t i = 0; i < mixed.size(); ++i)
        mixed[i] = (modes[0].samples[i] + modes[1].samples[i]) / kRoot2;
    const auto beat_run = bpm::bpm_propagate(mixed, index, geom, beat_grid, 2.2 * beat, 5);
    std::vector<double> crossing;
    double prev_c = 0.0, prev_z = 0.0;
    for (std::size_t s = 0; s < beat_run.snapshots.size(); ++s) {
        const auto& snap = beat_run.snapshots[s];
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < snap.field.size(); ++i) {
            const double p = std::norm(snap.field[i]);
            num += beat_grid.x_at(static_cast<int>(i)) * p;
            den += p;
        }
        const double c = num / den;
        if (s > 0 && c * prev_c < 0.0)
            crossing.push_back(prev_z + (snap.z - prev_z) * prev_c / (prev_c - c));
        prev_c = c;
        prev_z = snap.z;
    }
    check.require(crossing.size() >= 3, "too few centroid zero crossings");
    if (crossing.size() >= 3) {
        const double spacing =
            (crossing.back() - crossing.front()) / static_cast<double>(crossing.size() - 1);
        const double rel = std::abs(2.0 * spacing - beat) / beat;
        check.require(rel <= 0.01, "beat length off by > 1%");
        check.note("beat rel err " + fmt(rel));
    }

    // Full coupler separation run at the shipped defaults.
    const bpm::CouplerDesign design = bpm::design_coupler(
        geom, {defaults.gap_min, defaults.gap_max, defaults.gap_points}, defaults.crosstalk_threshold);
    check.require(design.feasible, "no feasible gap in the default range");
    const double structure = 0.5 * (design.gap + geom.core_width) + 0.5 * geom.core_width;
    const bpm::BpmGrid coupler_grid = runner::detail::grid_from(defaults, geom, structure);
    const auto fig = bpm::simulate_fig1(design, geom, coupler_grid, defaults.snapshots);
    check.require(fig.te1_transfer >= 0.98, "TE1 transfer < 0.98");
    check.require(fig.te0_crosstalk <= 0.02, "TE0 crosstalk > 0.02");
    check.note("transfer " + fmt(fig.te1_transfer));
    check.note("crosstalk " + fmt(fig.te0_crosstalk));
}

void determinism(Check& check) {
    cfg::ExperimentConfig c;
    c.experiment = cfg::ExperimentKind::nfield;
    c.mode = cfg::RunMode::mc;
    c.trials = 20000;
    c.seed = 7;
    c.nfield.n_min = 1;
    c.nfield.n_max = 3;
    c.nfield.theta_points = 16;

    std::string reference;
    for (const int threads : {1, 4, 8}) {
        c.threads = threads;
        c.output_dir = fresh_dir("det_t" + std::to_string(threads)).string();
        const auto summary = runner::run(c);
        const std::string bytes = slurp(summary.results_path);
        if (reference.empty())
            reference = bytes;
        else
            check.require(bytes == reference,
                          "results differ at threads=" + std::to_string(threads));
    }
    // Identical rerun of the same worker count is also byte-identical.
    c.threads = 4;
    c.output_dir = fresh_dir("det_rerun").string();
    check.require(slurp(runner::run(c).results_path) == reference, "rerun differs");
    check.note("bytes " + std::to_string(reference.size()));
}

}  // namespace

int main() {
    std::vector<Criterion> results;
    results.push_back(run_criterion(1, "two-analyzer correlation sampling", {5.0}, two_field_sampling));
    results.push_back(run_criterion(2, "four-setting optimum, lattice and ensemble", {30.0}, chsh_optimum));
    results.push_back(run_criterion(3, "density reduction and inseparability gap", {}, density_reduction));
    results.push_back(run_criterion(4, "three-analyzer correlation sampling", {}, three_field_sampling));
    results.push_back(run_criterion(5, "n-field super-resolution fringes", {60.0}, super_resolution));
    results.push_back(run_criterion(6, "phase-difference telescoping invariant", {}, telescoping));
    results.push_back(run_criterion(7, "phase-error operating point and variance law", {}, metrology_claims));
    results.push_back(run_criterion(8, "two-field variance brute-force oracle", {}, variance_oracle));
    results.push_back(run_criterion(9, "waveguide mode solver and coupler run", {120.0}, waveguide_engine));
    results.push_back(run_criterion(10, "byte-identical results across worker counts", {}, determinism));

    bool all = true;
    for (const auto& c : results) {
        all = all && c.pass;
        const std::string detail = c.detail.empty() ? "" : c.detail + " ";
        std::printf("[%s] %2d. %-48s %s(%.2f s)\n", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    detail.c_str(), c.seconds);
    }
    std::printf("%s\n", all ? "acceptance: all criteria passed" : "acceptance: FAILURES PRESENT");
    return all ? 0 : 1;
}
