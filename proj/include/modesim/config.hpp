#pragma once

#include <charconv>
#include <cstdint>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "modesim/ensemble.hpp"
#include "modesim/io.hpp"

namespace modesim::config {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg, int line = 0) : std::runtime_error(msg), line_no(line) {}
    int line_no;
};

enum class ExperimentKind { chsh, ghz, nfield, metrology, density, bpm_fig1, bpm_modes };
enum class RunMode { analytic, mc };
enum class VariantSelection { all, cos_sum, cos_diff, neg_cos_sum, neg_cos_diff };

struct ChshConfig {
    double grid_step = std::numbers::pi / 46.0;
    std::int64_t sequences = 25000;
    std::int64_t sequence_length = 40;
    VariantSelection variant = VariantSelection::all;

    bool operator==(const ChshConfig&) const = default;
};

struct GhzConfig {
    double theta1 = 0.0;
    double theta2 = 0.0;
    int theta_points = 64;  // theta3 grid over [0, 2pi)

    bool operator==(const GhzConfig&) const = default;
};

struct NfieldConfig {
    int n_min = 1;
    int n_max = 6;
    int theta_points = 96;  // theta grid over [0, 2pi)

    bool operator==(const NfieldConfig&) const = default;
};

struct MetrologyConfig {
    int n_min = 1;
    int n_max = 10;

    bool operator==(const MetrologyConfig&) const = default;
};

struct BpmConfig {
    double vacuum_wavelength = 1.55e-6;
    double n_core = 1.46;
    double n_clad = 1.45;
    double v_parameter = 2.5;
    int nx = 1024;
    double dz = 1e-6;
    double window_halfwidth = 0.0;  // 0 = sized automatically from mode decay
    double absorber_strength = 2e4;
    double gap_min = 8e-6;
    double gap_max = 16e-6;
    int gap_points = 33;
    double crosstalk_threshold = 0.005;
    int snapshots = 100;

    bool operator==(const BpmConfig&) const = default;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::chsh;
    std::int64_t trials = 100000;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = library default
    RunMode mode = RunMode::analytic;
    ensemble::PhaseDistribution granularity = ensemble::PhaseDistribution::continuous();
    std::string output_dir = "out";

    ChshConfig chsh;
    GhzConfig ghz;
    NfieldConfig nfield;
    MetrologyConfig metrology;
    BpmConfig bpm;

    bool operator==(const ExperimentConfig&) const = default;
};

inline std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::chsh: return "chsh";
        case ExperimentKind::ghz: return "ghz";
        case ExperimentKind::nfield: return "nfield";
        case ExperimentKind::metrology: return "metrology";
        case ExperimentKind::density: return "density";
        case ExperimentKind::bpm_fig1: return "bpm-fig1";
        case ExperimentKind::bpm_modes: return "bpm-modes";
    }
    return "?";
}

inline std::string_view to_string(RunMode m) { return m == RunMode::analytic ? "analytic" : "mc"; }

inline std::string_view to_string(VariantSelection v) {
    switch (v) {
        case VariantSelection::all: return "all";
        case VariantSelection::cos_sum: return "cos_sum";
        case VariantSelection::cos_diff: return "cos_diff";
        case VariantSelection::neg_cos_sum: return "neg_cos_sum";
        case VariantSelection::neg_cos_diff: return "neg_cos_diff";
    }
    return "?";
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] inline void fail(int line, const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line) + ": " + msg, line);
}

inline double parse_double_token(std::string_view s, int line) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail(line, "malformed number '" + std::string(s) + "'");
    return v;
}

inline std::int64_t parse_int_token(std::string_view s, int line) {
    s = trim(s);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail(line, "malformed integer '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t parse_uint_token(std::string_view s, int line) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail(line, "malformed unsigned integer '" + std::string(s) + "'");
    return v;
}

}  // namespace detail

// Angle literals: `0.25`, `0.5 pi`, `12/46 pi`, `3/4`, `pi`, `-pi`.
// Fractions use exact double division; `pi` multiplies by std::numbers::pi.
inline double parse_angle(std::string_view text, int line = 0) {
    std::string_view s = detail::trim(text);
    double scale = 1.0;
    if (s.size() >= 2 && s.substr(s.size() - 2) == "pi") {
        scale = std::numbers::pi;
        s = detail::trim(s.substr(0, s.size() - 2));
        if (s.empty()) return scale;
        if (s == "-") return -scale;
    }
    const std::size_t slash = s.find('/');
    if (slash != std::string_view::npos) {
        const double num = detail::parse_double_token(s.substr(0, slash), line);
        const double den = detail::parse_double_token(s.substr(slash + 1), line);
        if (den == 0.0) detail::fail(line, "zero denominator in angle '" + std::string(text) + "'");
        return scale * num / den;
    }
    return scale * detail::parse_double_token(s, line);
}

inline ExperimentConfig parse_config(std::string_view text) {
    using detail::fail;
    using detail::trim;

    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::string section;
    int line_no = 0;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            const std::string name(trim(line.substr(1, line.size() - 2)));
            if (name != "chsh" && name != "ghz" && name != "nfield" && name != "metrology" &&
                name != "density" && name != "bpm")
                fail(line_no, "unknown section [" + name + "]");
            section = name;
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) fail(line_no, "empty key");
        if (value.empty()) fail(line_no, "empty value for key '" + key + "'");

        const std::string qualified = section + "." + key;
        if (!seen.insert(qualified).second) fail(line_no, "duplicate key '" + key + "'");

        auto as_double = [&]() { return detail::parse_double_token(value, line_no); };
        auto as_int64 = [&]() { return detail::parse_int_token(value, line_no); };
        auto as_int = [&]() {
            const std::int64_t v = detail::parse_int_token(value, line_no);
            if (v < -2147483647LL || v > 2147483647LL) fail(line_no, "integer out of range");
            return static_cast<int>(v);
        };
        auto as_angle = [&]() { return parse_angle(value, line_no); };

        if (section.empty()) {
            if (key == "experiment") {
                if (value == "chsh") cfg.experiment = ExperimentKind::chsh;
                else if (value == "ghz") cfg.experiment = ExperimentKind::ghz;
                else if (value == "nfield") cfg.experiment = ExperimentKind::nfield;
                else if (value == "metrology") cfg.experiment = ExperimentKind::metrology;
                else if (value == "density") cfg.experiment = ExperimentKind::density;
                else if (value == "bpm-fig1") cfg.experiment = ExperimentKind::bpm_fig1;
                else if (value == "bpm-modes") cfg.experiment = ExperimentKind::bpm_modes;
                else fail(line_no, "unknown experiment '" + std::string(value) + "'");
            } else if (key == "trials") {
                cfg.trials = as_int64();
                if (cfg.trials < 1) fail(line_no, "trials must be >= 1");
            } else if (key == "seed") {
                cfg.seed = detail::parse_uint_token(value, line_no);
            } else if (key == "threads") {
                cfg.threads = as_int();
                if (cfg.threads < 0) fail(line_no, "threads must be >= 0");
            } else if (key == "mode") {
                if (value == "analytic") cfg.mode = RunMode::analytic;
                else if (value == "mc") cfg.mode = RunMode::mc;
                else fail(line_no, "mode must be 'analytic' or 'mc'");
            } else if (key == "granularity") {
                if (value == "continuous") {
                    cfg.granularity = ensemble::PhaseDistribution::continuous();
                } else if (value.substr(0, 8) == "discrete") {
                    const std::uint64_t g = detail::parse_uint_token(value.substr(8), line_no);
                    if (g == 0 || g > 0xffffffffULL) fail(line_no, "discrete levels out of range");
                    cfg.granularity = ensemble::PhaseDistribution::discrete(static_cast<std::uint32_t>(g));
                } else {
                    fail(line_no, "granularity must be 'continuous' or 'discrete G'");
                }
            } else if (key == "output_dir") {
                cfg.output_dir = std::string(value);
            } else {
                fail(line_no, "unknown key '" + key + "'");
            }
        } else if (section == "chsh") {
            if (key == "grid_step") {
                cfg.chsh.grid_step = as_angle();
                if (!(cfg.chsh.grid_step > 0.0)) fail(line_no, "grid_step must be > 0");
            } else if (key == "sequences") {
                cfg.chsh.sequences = as_int64();
            } else if (key == "sequence_length") {
                cfg.chsh.sequence_length = as_int64();
            } else if (key == "variant") {
                if (value == "all") cfg.chsh.variant = VariantSelection::all;
                else if (value == "cos_sum") cfg.chsh.variant = VariantSelection::cos_sum;
                else if (value == "cos_diff") cfg.chsh.variant = VariantSelection::cos_diff;
                else if (value == "neg_cos_sum") cfg.chsh.variant = VariantSelection::neg_cos_sum;
                else if (value == "neg_cos_diff") cfg.chsh.variant = VariantSelection::neg_cos_diff;
                else fail(line_no, "unknown variant '" + std::string(value) + "'");
            } else {
                fail(line_no, "unknown key '" + key + "' in [chsh]");
            }
        } else if (section == "ghz") {
            if (key == "theta1") cfg.ghz.theta1 = as_angle();
            else if (key == "theta2") cfg.ghz.theta2 = as_angle();
            else if (key == "theta_points") cfg.ghz.theta_points = as_int();
            else fail(line_no, "unknown key '" + key + "' in [ghz]");
        } else if (section == "nfield") {
            if (key == "n_min") cfg.nfield.n_min = as_int();
            else if (key == "n_max") cfg.nfield.n_max = as_int();
            else if (key == "theta_points") cfg.nfield.theta_points = as_int();
            else fail(line_no, "unknown key '" + key + "' in [nfield]");
        } else if (section == "metrology") {
            if (key == "n_min") cfg.metrology.n_min = as_int();
            else if (key == "n_max") cfg.metrology.n_max = as_int();
            else fail(line_no, "unknown key '" + key + "' in [metrology]");
        } else if (section == "density") {
            fail(line_no, "unknown key '" + key + "' in [density]");
        } else if (section == "bpm") {
            if (key == "vacuum_wavelength") cfg.bpm.vacuum_wavelength = as_double();
            else if (key == "n_core") cfg.bpm.n_core = as_double();
            else if (key == "n_clad") cfg.bpm.n_clad = as_double();
            else if (key == "v_parameter") cfg.bpm.v_parameter = as_double();
            else if (key == "nx") cfg.bpm.nx = as_int();
            else if (key == "dz") cfg.bpm.dz = as_double();
            else if (key == "window_halfwidth") cfg.bpm.window_halfwidth = as_double();
            else if (key == "absorber_strength") cfg.bpm.absorber_strength = as_double();
            else if (key == "gap_min") cfg.bpm.gap_min = as_double();
            else if (key == "gap_max") cfg.bpm.gap_max = as_double();
            else if (key == "gap_points") cfg.bpm.gap_points = as_int();
            else if (key == "crosstalk_threshold") cfg.bpm.crosstalk_threshold = as_double();
            else if (key == "snapshots") cfg.bpm.snapshots = as_int();
            else fail(line_no, "unknown key '" + key + "' in [bpm]");
        }
    }
    return cfg;
}

// Canonical text form; parse(render(c)) == c because numbers are written
// with shortest round-trip formatting.
inline std::string render_config(const ExperimentConfig& c) {
    std::string out;
    auto kv = [&out](std::string_view key, const std::string& value) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    };
    kv("experiment", std::string(to_string(c.experiment)));
    kv("trials", io::format_int(c.trials));
    kv("seed", io::format_uint(c.seed));
    kv("threads", io::format_int(c.threads));
    kv("mode", std::string(to_string(c.mode)));
    kv("granularity", c.granularity.is_discrete() ? "discrete " + io::format_uint(c.granularity.levels())
                                                  : "continuous");
    kv("output_dir", c.output_dir);

    out += "\n[chsh]\n";
    kv("grid_step", io::format_double(c.chsh.grid_step));
    kv("sequences", io::format_int(c.chsh.sequences));
    kv("sequence_length", io::format_int(c.chsh.sequence_length));
    kv("variant", std::string(to_string(c.chsh.variant)));

    out += "\n[ghz]\n";
    kv("theta1", io::format_double(c.ghz.theta1));
    kv("theta2", io::format_double(c.ghz.theta2));
    kv("theta_points", io::format_int(c.ghz.theta_points));

    out += "\n[nfield]\n";
    kv("n_min", io::format_int(c.nfield.n_min));
    kv("n_max", io::format_int(c.nfield.n_max));
    kv("theta_points", io::format_int(c.nfield.theta_points));

    out += "\n[metrology]\n";
    kv("n_min", io::format_int(c.metrology.n_min));
    kv("n_max", io::format_int(c.metrology.n_max));

    out += "\n[bpm]\n";
    kv("vacuum_wavelength", io::format_double(c.bpm.vacuum_wavelength));
    kv("n_core", io::format_double(c.bpm.n_core));
    kv("n_clad", io::format_double(c.bpm.n_clad));
    kv("v_parameter", io::format_double(c.bpm.v_parameter));
    kv("nx", io::format_int(c.bpm.nx));
    kv("dz", io::format_double(c.bpm.dz));
    kv("window_halfwidth", io::format_double(c.bpm.window_halfwidth));
    kv("absorber_strength", io::format_double(c.bpm.absorber_strength));
    kv("gap_min", io::format_double(c.bpm.gap_min));
    kv("gap_max", io::format_double(c.bpm.gap_max));
    kv("gap_points", io::format_int(c.bpm.gap_points));
    kv("crosstalk_threshold", io::format_double(c.bpm.crosstalk_threshold));
    kv("snapshots", io::format_int(c.bpm.snapshots));
    return out;
}

}  // namespace modesim::config
