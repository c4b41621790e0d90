#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "modesim/ensemble.hpp"

namespace modesim::optics {

using Complex = std::complex<double>;

inline constexpr double kNormTolerance = 1e-12;

// One field as a coherent superposition of the TE0 and TE1 guide modes,
// carrying its own uniformly random global phase. `c0`/`c1` accumulate all
// deterministic propagation phase; `global_phase` is the field's phi.
struct ModeState {
    Complex c0{1.0, 0.0};
    Complex c1{0.0, 0.0};
    double global_phase = 0.0;

    double power() const { return std::norm(c0) + std::norm(c1); }

    // Validating factory: unit power within kNormTolerance.
    static ModeState make(Complex c0, Complex c1, double global_phase = 0.0) {
        ModeState s{c0, c1, global_phase};
        if (std::abs(s.power() - 1.0) > kNormTolerance)
            throw std::invalid_argument("ModeState::make: amplitudes are not unit power");
        return s;
    }

    // Rescales arbitrary amplitudes to unit power.
    static ModeState normalized(Complex c0, Complex c1, double global_phase = 0.0) {
        const double p = std::norm(c0) + std::norm(c1);
        if (p <= 0.0) throw std::invalid_argument("ModeState::normalized: zero field");
        const double scale = 1.0 / std::sqrt(p);
        return ModeState{c0 * scale, c1 * scale, global_phase};
    }

    // Equal-power superposition (C0 = C1 = 1/sqrt(2)), the preparation used
    // throughout the correlation experiments.
    static ModeState balanced(double global_phase = 0.0) {
        return ModeState{{std::numbers::sqrt2 / 2.0, 0.0}, {std::numbers::sqrt2 / 2.0, 0.0}, global_phase};
    }

    static ModeState te0(double global_phase = 0.0) { return ModeState{{1.0, 0.0}, {0.0, 0.0}, global_phase}; }
    static ModeState te1(double global_phase = 0.0) { return ModeState{{0.0, 0.0}, {1.0, 0.0}, global_phase}; }
};

// Propagation constants of the two guided modes over a length z. The
// fundamental mode always has the larger constant.
struct PropagationSpec {
    double beta0 = 0.0;  // rad/m, TE0
    double beta1 = 0.0;  // rad/m, TE1
    double z = 0.0;      // meters

    double delta_beta() const { return beta1 - beta0; }
};

// Variable phase modulator setting of a mode analyzer.
struct AnalyzerSetting {
    double theta = 0.0;
};

inline void validate_spec(const PropagationSpec& spec) {
    if (!(spec.beta1 < spec.beta0))
        throw std::invalid_argument("PropagationSpec: guided TE0 must have beta0 > beta1");
    if (spec.z < 0.0) throw std::invalid_argument("PropagationSpec: z must be >= 0");
}

// Free propagation: each mode advances by its own propagation constant, so
// the inter-mode phase grows by delta_beta * z. Unitary.
inline ModeState propagate_free(const ModeState& state, const PropagationSpec& spec) {
    validate_spec(spec);
    return {state.c0 * std::polar(1.0, spec.beta0 * spec.z),
            state.c1 * std::polar(1.0, spec.beta1 * spec.z), state.global_phase};
}

// Convenience constructor: amplitudes already advanced by `spec`.
inline ModeState make_propagated(Complex c0, Complex c1, const PropagationSpec& spec,
                                 double global_phase = 0.0) {
    return propagate_free(ModeState::make(c0, c1, global_phase), spec);
}

// Intensity difference of the mode analyzer outputs,
// A(theta) = <psi| [[0, e^{i theta}], [e^{-i theta}, 0]] |psi>
//          = 2 Re(conj(c0) c1 e^{i theta}).
// The global phase multiplies both amplitudes and cancels exactly.
inline double analyzer_intensity_difference(const ModeState& state, const AnalyzerSetting& setting) {
    const Complex cross = std::conj(state.c0) * state.c1 * std::polar(1.0, setting.theta);
    return 2.0 * cross.real();
}

// Ideal directional coupler that completely exchanges the TE1 modes of two
// fields. Re-expressed against each output's own global phase, the traded
// TE1 amplitude picks up e^{+i lambda} on one arm and e^{-i lambda} on the
// other, lambda = phi_b - phi_a. TE0 passes untouched (zero crosstalk, zero
// insertion phase); total power over both arms is conserved.
inline std::pair<ModeState, ModeState> coupler_exchange_pair(const ModeState& a, const ModeState& b) {
    const double lambda = b.global_phase - a.global_phase;
    const Complex offset = std::polar(1.0, lambda);
    ModeState out_a{a.c0, b.c1 * offset, a.global_phase};
    ModeState out_b{b.c0, a.c1 * std::conj(offset), b.global_phase};
    return {out_a, out_b};
}

// N-field generalization realized by a chain of N-1 couplers: output i keeps
// the TE0 of input i and receives the TE1 of input i+1 (cyclically) with
// phase offset e^{i lambda_i}, lambda_i = phi_{i+1} - phi_i.
inline std::vector<ModeState> chain_exchange(const std::vector<ModeState>& states) {
    if (states.size() < 2) throw std::invalid_argument("chain_exchange: needs at least 2 fields");
    const std::size_t n = states.size();
    std::vector<ModeState> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t next = (i + 1 == n) ? 0 : i + 1;
        const double lambda = states[next].global_phase - states[i].global_phase;
        out[i] = ModeState{states[i].c0, states[next].c1 * std::polar(1.0, lambda),
                           states[i].global_phase};
    }
    return out;
}

// Common phase shift theta applied to every TE1 component (the measured
// phase difference in the interferometer).
inline std::vector<ModeState> apply_common_phase(std::vector<ModeState> states, double theta) {
    const Complex shift = std::polar(1.0, theta);
    for (auto& s : states) s.c1 *= shift;
    return states;
}

}  // namespace modesim::optics
