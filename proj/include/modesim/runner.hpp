#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "modesim/bpm.hpp"
#include "modesim/config.hpp"
#include "modesim/correlation.hpp"
#include "modesim/ensemble.hpp"
#include "modesim/io.hpp"
#include "modesim/metrology.hpp"
#include "modesim/version.hpp"

namespace modesim::runner {

using config::ExperimentConfig;
using config::ExperimentKind;
using config::RunMode;

struct RunSummary {
    std::filesystem::path results_path;
    std::filesystem::path meta_path;
    std::filesystem::path field_path;  // only set by the BPM experiments
    double wall_seconds = 0.0;
};

namespace detail {

// Distinct RNG-stream namespaces per scan cell (see metrology::kCellStride).
inline std::uint64_t cell_offset(std::uint64_t cell) { return cell * metrology::kCellStride; }

inline std::vector<correlation::CorrelationVariant> selected_variants(config::VariantSelection sel) {
    using correlation::CorrelationVariant;
    switch (sel) {
        case config::VariantSelection::cos_sum: return {CorrelationVariant::cos_sum};
        case config::VariantSelection::cos_diff: return {CorrelationVariant::cos_diff};
        case config::VariantSelection::neg_cos_sum: return {CorrelationVariant::neg_cos_sum};
        case config::VariantSelection::neg_cos_diff: return {CorrelationVariant::neg_cos_diff};
        case config::VariantSelection::all: break;
    }
    return {CorrelationVariant::cos_sum, CorrelationVariant::cos_diff, CorrelationVariant::neg_cos_sum,
            CorrelationVariant::neg_cos_diff};
}

inline std::string_view variant_name(correlation::CorrelationVariant v) {
    using correlation::CorrelationVariant;
    switch (v) {
        case CorrelationVariant::cos_sum: return "cos_sum";
        case CorrelationVariant::cos_diff: return "cos_diff";
        case CorrelationVariant::neg_cos_sum: return "neg_cos_sum";
        case CorrelationVariant::neg_cos_diff: return "neg_cos_diff";
    }
    return "?";
}

inline std::vector<double> uniform_angle_grid(int points) {
    if (points < 4) throw config::ConfigError("config: theta_points must be >= 4");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int j = 0; j < points; ++j)
        grid[static_cast<std::size_t>(j)] = ensemble::kTwoPi * j / static_cast<double>(points);
    return grid;
}

inline nlohmann::json run_chsh(const ExperimentConfig& cfg, io::CsvWriter& csv) {
    nlohmann::json details = nlohmann::json::array();
    const bool mc = cfg.mode == RunMode::mc;
    for (const auto variant : selected_variants(cfg.chsh.variant)) {
        correlation::ChshOptimum opt;
        io::Cell b_value, std_error, sequences, sequence_length;
        if (mc) {
            correlation::ChshEnsembleParams params;
            params.sequences = cfg.chsh.sequences;
            params.sequence_length = cfg.chsh.sequence_length;
            params.dist = cfg.granularity;
            params.seed = cfg.seed;
            params.threads = cfg.threads;
            opt = correlation::optimize_chsh(variant, cfg.chsh.grid_step, params);
            const correlation::CorrelationEstimate est = correlation::chsh_value(opt.settings, params);
            b_value = est.mean;
            std_error = est.std_error();
            sequences = params.sequences;
            sequence_length = params.sequence_length;
        } else {
            opt = correlation::optimize_chsh(variant, cfg.chsh.grid_step);
            b_value = opt.max_abs_b;
        }
        csv.row({std::string(variant_name(variant)), opt.settings.theta1, opt.settings.theta1p,
                 opt.settings.theta2, opt.settings.theta2p, opt.grid_abs_b, b_value, std_error,
                 sequences, sequence_length});
        details.push_back({{"variant", variant_name(variant)},
                           {"grid_abs_b", opt.grid_abs_b},
                           {"violation", opt.violation}});
    }
    return {{"variants", std::move(details)}};
}

inline nlohmann::json run_ghz(const ExperimentConfig& cfg, io::CsvWriter& csv) {
    const std::vector<double> grid = uniform_angle_grid(cfg.ghz.theta_points);
    const bool mc = cfg.mode == RunMode::mc;
    std::uint64_t cell = 0;
    for (const double theta3 : grid) {
        const double analytic = correlation::three_field_correlation(cfg.ghz.theta1, cfg.ghz.theta2, theta3);
        io::Cell s_mc, std_error, trials;
        if (mc) {
            correlation::McParams params{cfg.trials, cfg.granularity, cfg.seed, cfg.threads,
                                         cell_offset(cell)};
            const auto est =
                correlation::three_field_correlation(cfg.ghz.theta1, cfg.ghz.theta2, theta3, params);
            s_mc = est.mean;
            std_error = est.std_error();
            trials = est.count;
        }
        ++cell;
        csv.row({cfg.ghz.theta1, cfg.ghz.theta2, theta3, analytic, s_mc, std_error, trials});
    }
    return {{"theta_points", cfg.ghz.theta_points}};
}

inline nlohmann::json run_nfield(const ExperimentConfig& cfg, io::CsvWriter& csv) {
    if (cfg.nfield.n_min < 1 || cfg.nfield.n_max < cfg.nfield.n_min)
        throw config::ConfigError("config: nfield requires 1 <= n_min <= n_max");
    const std::vector<double> grid = uniform_angle_grid(cfg.nfield.theta_points);
    const bool mc = cfg.mode == RunMode::mc;
    std::uint64_t cell = 0;
    for (int n = cfg.nfield.n_min; n <= cfg.nfield.n_max; ++n) {
        for (const double theta : grid) {
            const double analytic = correlation::n_field_correlation(theta, n);
            io::Cell s_mc, std_error, trials;
            if (mc) {
                correlation::McParams params{cfg.trials, cfg.granularity, cfg.seed, cfg.threads,
                                             cell_offset(cell)};
                const auto est = correlation::n_field_correlation(theta, n, params);
                s_mc = est.mean;
                std_error = est.std_error();
                trials = est.count;
            }
            ++cell;
            csv.row({n, theta, analytic, s_mc, std_error, trials});
        }
    }
    return {{"n_min", cfg.nfield.n_min}, {"n_max", cfg.nfield.n_max}};
}

inline nlohmann::json run_metrology(const ExperimentConfig& cfg, io::CsvWriter& csv) {
    if (cfg.metrology.n_min < 1 || cfg.metrology.n_max < cfg.metrology.n_min)
        throw config::ConfigError("config: metrology requires 1 <= n_min <= n_max");
    const bool mc = cfg.mode == RunMode::mc;
    for (int n = cfg.metrology.n_min; n <= cfg.metrology.n_max; ++n) {
        const double theta_star = metrology::heisenberg_theta_star(n);
        const double sql = metrology::sql_phase_error(n);
        const double dt_paper = metrology::heisenberg_phase_error(n);
        const double variance_derived =
            metrology::derived_variance(n, theta_star, metrology::VarianceModel::cyclic);
        const double slope = metrology::analytic_slope(n, theta_star);
        const double dt_derived = std::sqrt(variance_derived) / std::abs(slope);
        const metrology::PaperVariance pv = metrology::paper_variance(n, theta_star);
        const double s_analytic = metrology::analytic_signal(n, theta_star);

        io::Cell s_mc, s_variance_mc, mean_se, variance_se, trials;
        if (mc) {
            const auto rows = metrology::phase_error_scan(
                {n}, {theta_star}, cfg.trials, cfg.seed, cfg.granularity, cfg.threads,
                static_cast<std::uint64_t>(n - cfg.metrology.n_min));
            const metrology::MetrologyResult& r = rows.front();
            s_mc = r.s_mean;
            s_variance_mc = r.s_variance_mc;
            mean_se = r.mean_std_error;
            variance_se = r.variance_std_error;
            trials = r.trials;
        }
        csv.row({n, theta_star, sql, dt_paper, dt_derived, s_analytic, s_mc, s_variance_mc, mean_se,
                 variance_se, pv.value, pv.valid, variance_derived, slope, trials});
    }
    return {{"n_min", cfg.metrology.n_min}, {"n_max", cfg.metrology.n_max}};
}

inline nlohmann::json run_density(const ExperimentConfig& cfg, io::CsvWriter& csv) {
    const correlation::ReducedDensity reduced = correlation::ensemble_reduce_density(cfg.granularity);
    const bool mc = cfg.mode == RunMode::mc;
    correlation::DensityMatrix4 rho_mc;
    if (mc)
        rho_mc = correlation::mc_average_density({cfg.trials, cfg.granularity, cfg.seed, cfg.threads, 0});
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            io::Cell re_mc, im_mc;
            if (mc) {
                re_mc = rho_mc(r, c).real();
                im_mc = rho_mc(r, c).imag();
            }
            csv.row({static_cast<int>(r), static_cast<int>(c), reduced.rho(r, c).real(),
                     reduced.rho(r, c).imag(), re_mc, im_mc});
        }
    nlohmann::json details{{"bell_form", reduced.bell_form},
                           {"inseparability_gap", correlation::inseparability_gap(reduced.rho)}};
    if (mc) details["mc_max_abs_diff"] = rho_mc.max_abs_diff(reduced.rho);
    return details;
}

inline bpm::SlabGeometry geometry_from(const config::BpmConfig& c) {
    return bpm::SlabGeometry::with_v(c.n_core, c.n_clad, c.vacuum_wavelength, c.v_parameter);
}

// Window sized so the non-absorbing 80% holds the structure plus 8 decay
// lengths of the slowest-decaying mode, unless the config pins a halfwidth.
inline bpm::BpmGrid grid_from(const config::BpmConfig& c, const bpm::SlabGeometry& geom,
                              double structure_halfwidth) {
    const auto sols = bpm::solve_slab_parameters(geom);
    const double gamma_min = 2.0 * sols.back().w / geom.core_width;
    double hw = c.window_halfwidth;
    if (hw <= 0.0) hw = (structure_halfwidth + 8.0 / gamma_min) / 0.8;
    bpm::BpmGrid grid;
    grid.x_min = -hw;
    grid.x_max = hw;
    grid.nx = c.nx;
    grid.dz = c.dz;
    grid.boundary.strength = c.absorber_strength;
    return grid;
}

inline nlohmann::json run_bpm_modes(const ExperimentConfig& cfg, io::CsvWriter& csv,
                                    const std::filesystem::path& field_path) {
    const bpm::SlabGeometry geom = geometry_from(cfg.bpm);
    const bpm::BpmGrid grid = grid_from(cfg.bpm, geom, 0.5 * geom.core_width);
    const auto modes = bpm::solve_slab_modes(geom, grid);
    for (const auto& m : modes)
        csv.row({m.order, m.n_eff, m.beta, m.parity == bpm::Parity::even ? "even" : "odd", m.residual});

    std::vector<std::string> header{"x", "index"};
    for (const auto& m : modes) header.push_back("mode" + io::format_int(m.order));
    io::CsvWriter field_csv(field_path, header);
    const auto index = bpm::single_guide_index(geom, grid);
    for (int i = 0; i < grid.nx; ++i) {
        std::vector<io::Cell> cells{grid.x_at(i), index[static_cast<std::size_t>(i)]};
        for (const auto& m : modes) cells.emplace_back(m.samples[static_cast<std::size_t>(i)]);
        field_csv.row(cells);
    }
    field_csv.close();

    nlohmann::json details{{"v_parameter", geom.v_parameter()},
                           {"core_width", geom.core_width},
                           {"modes", modes.size()}};
    if (modes.size() >= 2) {
        const double delta_beta = modes[0].beta - modes[1].beta;
        details["delta_beta"] = delta_beta;
        details["beat_length"] = ensemble::kTwoPi / delta_beta;
    }
    return details;
}

inline nlohmann::json run_bpm_fig1(const ExperimentConfig& cfg, io::CsvWriter& csv,
                                   const std::filesystem::path& field_path) {
    const bpm::SlabGeometry geom = geometry_from(cfg.bpm);
    const bpm::CouplerDesign design =
        bpm::design_coupler(geom, {cfg.bpm.gap_min, cfg.bpm.gap_max, cfg.bpm.gap_points},
                            cfg.bpm.crosstalk_threshold);
    const double structure_halfwidth = 0.5 * (design.gap + geom.core_width) + 0.5 * geom.core_width;
    const bpm::BpmGrid grid = grid_from(cfg.bpm, geom, structure_halfwidth);
    const bpm::Fig1Result fig = bpm::simulate_fig1(design, geom, grid, cfg.bpm.snapshots);

    for (const auto& p : fig.power_series)
        csv.row({p.z, p.a_te0, p.a_te1, p.b_te0, p.b_te1, p.total});

    std::vector<std::string> header{"z"};
    for (int i = 0; i < grid.nx; ++i) header.push_back(io::format_double(grid.x_at(i)));
    io::CsvWriter field_csv(field_path, header);
    for (const auto& snap : fig.snapshots) {
        std::vector<io::Cell> cells{snap.z};
        for (const auto& c : snap.field) cells.emplace_back(std::norm(c));
        field_csv.row(cells);
    }
    field_csv.close();

    return {{"design",
             {{"gap", design.gap},
              {"length", design.length},
              {"kappa0", design.kappa0},
              {"kappa1", design.kappa1},
              {"predicted_te1_transfer", design.predicted_te1_transfer},
              {"predicted_te0_crosstalk", design.predicted_te0_crosstalk},
              {"feasible", design.feasible}}},
            {"measured",
             {{"te1_transfer", fig.te1_transfer},
              {"te0_crosstalk", fig.te0_crosstalk},
              {"arm_a_purity", fig.arm_a_purity},
              {"arm_b_purity", fig.arm_b_purity}}},
            {"reference_index", fig.reference_index},
            {"core_width", geom.core_width}};
}

}  // namespace detail

inline RunSummary run(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const auto start = std::chrono::steady_clock::now();

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw io::IoError("cannot create output directory " + cfg.output_dir + ": " + ec.message());

    RunSummary summary;
    summary.results_path = fs::path(cfg.output_dir) / "results.csv";
    summary.meta_path = fs::path(cfg.output_dir) / "meta.json";
    const fs::path field_path = fs::path(cfg.output_dir) / "field.csv";

    nlohmann::json details;
    switch (cfg.experiment) {
        case ExperimentKind::chsh: {
            io::CsvWriter csv(summary.results_path,
                              {"variant", "theta1", "theta1p", "theta2", "theta2p", "b_grid", "b_value",
                               "std_error", "sequences", "sequence_length"});
            details = detail::run_chsh(cfg, csv);
            csv.close();
            break;
        }
        case ExperimentKind::ghz: {
            io::CsvWriter csv(summary.results_path,
                              {"theta1", "theta2", "theta3", "s_analytic", "s_mc", "std_error", "trials"});
            details = detail::run_ghz(cfg, csv);
            csv.close();
            break;
        }
        case ExperimentKind::nfield: {
            io::CsvWriter csv(summary.results_path,
                              {"n", "theta", "s_analytic", "s_mc", "std_error", "trials"});
            details = detail::run_nfield(cfg, csv);
            csv.close();
            break;
        }
        case ExperimentKind::metrology: {
            io::CsvWriter csv(summary.results_path,
                              {"n", "theta_star", "delta_theta_sql", "delta_theta_paper",
                               "delta_theta_derived", "s_analytic", "s_mc", "s_variance_mc",
                               "mean_std_error", "variance_std_error", "s_variance_paper", "paper_valid",
                               "s_variance_derived", "slope", "trials"});
            details = detail::run_metrology(cfg, csv);
            csv.close();
            break;
        }
        case ExperimentKind::density: {
            io::CsvWriter csv(summary.results_path,
                              {"row", "col", "re_analytic", "im_analytic", "re_mc", "im_mc"});
            details = detail::run_density(cfg, csv);
            csv.close();
            break;
        }
        case ExperimentKind::bpm_modes: {
            io::CsvWriter csv(summary.results_path, {"order", "n_eff", "beta", "parity", "residual"});
            details = detail::run_bpm_modes(cfg, csv, field_path);
            csv.close();
            summary.field_path = field_path;
            break;
        }
        case ExperimentKind::bpm_fig1: {
            io::CsvWriter csv(summary.results_path,
                              {"z", "arm_a_te0", "arm_a_te1", "arm_b_te0", "arm_b_te1", "total_power"});
            details = detail::run_bpm_fig1(cfg, csv, field_path);
            csv.close();
            summary.field_path = field_path;
            break;
        }
    }

    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json meta{
        {"version", kVersion},
        {"experiment", config::to_string(cfg.experiment)},
        {"mode", config::to_string(cfg.mode)},
        {"seed", cfg.seed},
        {"trials", cfg.trials},
        {"threads", cfg.threads},
        {"granularity", cfg.granularity.is_discrete()
                            ? nlohmann::json{{"kind", "discrete"}, {"levels", cfg.granularity.levels()}}
                            : nlohmann::json{{"kind", "continuous"}}},
        {"wall_time_seconds", summary.wall_seconds},
        {"config", config::render_config(cfg)},
        {"details", std::move(details)},
    };
    io::write_text_file(summary.meta_path, meta.dump(2) + "\n");
    return summary;
}

}  // namespace modesim::runner
