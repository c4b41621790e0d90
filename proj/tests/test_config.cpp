#include <cmath>
#include <numbers>

#include "catch_amalgamated.hpp"
#include "modesim/config.hpp"

namespace cfg = modesim::config;

TEST_CASE("angle literals accept plain, fraction and pi forms", "[config]") {
    CHECK(cfg::parse_angle("0.75") == 0.75);
    CHECK(cfg::parse_angle("3/4") == 0.75);
    CHECK(cfg::parse_angle("pi") == std::numbers::pi);
    CHECK(cfg::parse_angle("-pi") == -std::numbers::pi);
    CHECK(cfg::parse_angle("0.5 pi") == 0.5 * std::numbers::pi);
    CHECK(cfg::parse_angle("12/46 pi") == 12.0 / 46.0 * std::numbers::pi);
    CHECK(cfg::parse_angle("  1/46 pi  ") == 1.0 / 46.0 * std::numbers::pi);
    CHECK(cfg::parse_angle("-3/2 pi") == -1.5 * std::numbers::pi);

    CHECK_THROWS_AS(cfg::parse_angle("two pi"), cfg::ConfigError);
    CHECK_THROWS_AS(cfg::parse_angle("1/0 pi"), cfg::ConfigError);
    CHECK_THROWS_AS(cfg::parse_angle(""), cfg::ConfigError);
}

TEST_CASE("empty config text yields the default experiment", "[config]") {
    const auto parsed = cfg::parse_config("");
    CHECK(parsed == cfg::ExperimentConfig{});
    CHECK(parsed.experiment == cfg::ExperimentKind::chsh);
    CHECK(parsed.trials == 100000);
    CHECK(parsed.mode == cfg::RunMode::analytic);
    CHECK_FALSE(parsed.granularity.is_discrete());
}

TEST_CASE("full config round trip through every section", "[config]") {
    const std::string text = R"(# run description
experiment = nfield      # optical comb scan
trials = 250000
seed = 12345678901234567890
threads = 4
mode = mc
granularity = discrete 8
output_dir = scans/run1

[chsh]
grid_step = 1/92 pi
sequences = 1000
sequence_length = 25
variant = neg_cos_diff

[ghz]
theta1 = 0.25 pi
theta2 = -0.5
theta_points = 48

[nfield]
n_min = 2
n_max = 5
theta_points = 128

[metrology]
n_min = 1
n_max = 12

[bpm]
vacuum_wavelength = 1.3e-6
n_core = 1.47
n_clad = 1.45
v_parameter = 2.2
nx = 512
dz = 5e-7
window_halfwidth = 4e-5
absorber_strength = 1e4
gap_min = 9e-6
gap_max = 15e-6
gap_points = 13
crosstalk_threshold = 0.01
snapshots = 50
)";
    const auto c = cfg::parse_config(text);
    CHECK(c.experiment == cfg::ExperimentKind::nfield);
    CHECK(c.trials == 250000);
    CHECK(c.seed == 12345678901234567890ULL);
    CHECK(c.threads == 4);
    CHECK(c.mode == cfg::RunMode::mc);
    REQUIRE(c.granularity.is_discrete());
    CHECK(c.granularity.levels() == 8);
    CHECK(c.output_dir == "scans/run1");
    CHECK(c.chsh.grid_step == std::numbers::pi / 92.0);
    CHECK(c.chsh.sequences == 1000);
    CHECK(c.chsh.sequence_length == 25);
    CHECK(c.chsh.variant == cfg::VariantSelection::neg_cos_diff);
    CHECK(c.ghz.theta1 == 0.25 * std::numbers::pi);
    CHECK(c.ghz.theta2 == -0.5);
    CHECK(c.ghz.theta_points == 48);
    CHECK(c.nfield.n_min == 2);
    CHECK(c.nfield.n_max == 5);
    CHECK(c.nfield.theta_points == 128);
    CHECK(c.metrology.n_max == 12);
    CHECK(c.bpm.vacuum_wavelength == 1.3e-6);
    CHECK(c.bpm.nx == 512);
    CHECK(c.bpm.gap_points == 13);
    CHECK(c.bpm.snapshots == 50);

    // Same key name in different sections is legal.
    const auto twice = cfg::parse_config("[ghz]\ntheta_points = 8\n[nfield]\ntheta_points = 16\n");
    CHECK(twice.ghz.theta_points == 8);
    CHECK(twice.nfield.theta_points == 16);
}

TEST_CASE("parse errors carry the offending line number", "[config]") {
    auto line_of = [](const std::string& text) {
        try {
            (void)cfg::parse_config(text);
        } catch (const cfg::ConfigError& e) {
            return e.line_no;
        }
        return -1;
    };

    CHECK(line_of("trials = 10\ntrials = 20\n") == 2);
    CHECK(line_of("wavelength = 1.55e-6\n") == 1);          // bpm key outside its section
    CHECK(line_of("\n\nnot a key value pair\n") == 3);
    CHECK(line_of("[chsh]\ngrid_step = fast\n") == 2);
    CHECK(line_of("[warp]\n") == 1);
    CHECK(line_of("[bpm\n") == 1);
    CHECK(line_of("seed =\n") == 1);
    CHECK(line_of("trials = 0\n") == 1);
    CHECK(line_of("threads = -1\n") == 1);
    CHECK(line_of("mode = sometimes\n") == 1);
    CHECK(line_of("granularity = discrete 0\n") == 1);
    CHECK(line_of("granularity = discrete 4294967296\n") == 1);
    CHECK(line_of("granularity = coarse\n") == 1);
    CHECK(line_of("experiment = everything\n") == 1);
    CHECK(line_of("[chsh]\nvariant = diagonal\n") == 2);
    CHECK(line_of("[density]\nanything = 1\n") == 2);
}

TEST_CASE("rendered config parses back to an equal value", "[config]") {
    cfg::ExperimentConfig c;
    c.experiment = cfg::ExperimentKind::bpm_fig1;
    c.trials = 314159;
    c.seed = 0xdeadbeefcafeULL;
    c.threads = 6;
    c.mode = cfg::RunMode::mc;
    c.granularity = modesim::ensemble::PhaseDistribution::discrete(46);
    c.output_dir = "out/run-7";
    c.chsh.grid_step = std::numbers::pi / 46.0;
    c.chsh.sequences = 12000;
    c.chsh.sequence_length = 37;
    c.chsh.variant = cfg::VariantSelection::cos_diff;
    c.ghz.theta1 = 1.0 / 3.0;
    c.ghz.theta2 = -2.0 * std::numbers::pi / 7.0;
    c.ghz.theta_points = 96;
    c.nfield.n_min = 3;
    c.nfield.n_max = 8;
    c.nfield.theta_points = 64;
    c.metrology.n_min = 2;
    c.metrology.n_max = 20;
    c.bpm.vacuum_wavelength = 1.31e-6;
    c.bpm.v_parameter = 2.35;
    c.bpm.nx = 2048;
    c.bpm.dz = 7.5e-7;
    c.bpm.window_halfwidth = 5.25e-5;
    c.bpm.gap_min = 8.5e-6;
    c.bpm.gap_max = 14.5e-6;
    c.bpm.gap_points = 25;
    c.bpm.crosstalk_threshold = 0.0075;
    c.bpm.snapshots = 150;

    const std::string text = cfg::render_config(c);
    const auto back = cfg::parse_config(text);
    CHECK(back == c);

    // Idempotent: rendering the reparsed value reproduces the text.
    CHECK(cfg::render_config(back) == text);

    // Defaults round-trip too (continuous granularity path).
    const cfg::ExperimentConfig d;
    CHECK(cfg::parse_config(cfg::render_config(d)) == d);
}
