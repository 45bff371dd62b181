#pragma once
// Closed-form displacement, probability, weak-value and SNR expressions.
// All displacements are in units of σ.

#include <cmath>
#include <string>
#include <utility>

#include "optoweak/dynamics.hpp"

namespace optoweak::analytic {

struct Inputs {
    double alpha2 = 0.0;  ///< |α|²
    double k = 0.0;
    double wm_t = 0.0;
    double delta = 0.0;

    EvolutionParams evolution() const { return evolution_params(k, 0.0, wm_t); }
    cplx disp() const { return evolution().disp; }
    double kick() const { return evolution().kick(); }
    double disp_abs() const { return evolution().disp_abs(); }
};

inline Inputs inputs(double alpha2, double k, double wm_t, double delta) {
    if (!(alpha2 >= 0.0)) throw DomainError("analytic: alpha2 must be >= 0");
    (void)evolution_params(k, 0.0, wm_t);  // validates k, wm_t
    return {alpha2, k, wm_t, delta};
}

enum class Regime { wva, boundary, strong_backaction, intermediate };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::wva: return "wva";
        case Regime::boundary: return "boundary";
        case Regime::strong_backaction: return "strong-backaction";
        case Regime::intermediate: return "intermediate";
    }
    return "unknown";
}

/// "≫" is read as a ratio δ/(|ϕ|/2) of at least `wva_ratio`.
struct RegimeThresholds {
    double wva_ratio = 10.0;
    double boundary_relative = 0.01;
};

inline Regime classify(const Inputs& in, const RegimeThresholds& th = {}) {
    const double half = in.disp_abs() / 2.0;
    const double d = std::abs(in.delta);
    if (half == 0.0) return Regime::wva;
    if (std::abs(d - half) <= th.boundary_relative * half) return Regime::boundary;
    if (d < half) return Regime::strong_backaction;
    if (d >= th.wva_ratio * half) return Regime::wva;
    return Regime::intermediate;
}

/// Denominator 2δ² + |ϕ|²/2 shared by the click-branch expressions.
inline double backaction_denominator(const Inputs& in) {
    const double a = in.disp_abs();
    return 2.0 * in.delta * in.delta + a * a / 2.0;
}

inline double q_noclick(const Inputs& in) { return in.kick() * in.alpha2 / 2.0; }

inline double q_diff(const Inputs& in) {
    const double den = backaction_denominator(in);
    if (den == 0.0) throw DegenerateBranchError("q_diff: delta = phi = 0", 0.0);
    return in.delta * in.kick() / den;
}

inline double q_click(const Inputs& in) {
    const double den = backaction_denominator(in);
    if (den == 0.0) throw DegenerateBranchError("q_click: delta = phi = 0", 0.0);
    return in.kick() * (in.alpha2 / 2.0 + in.delta / den);
}

/// δ* = |ϕ|/2 maximizing q_diff.
inline double q_diff_argmax(double k, double wm_t) { return evolution_params(k, 0.0, wm_t).disp_abs() / 2.0; }

inline double weak_value_one_photon(double delta) {
    if (delta == 0.0) throw DomainError("weak value undefined at delta = 0");
    return 1.0 / (2.0 * delta);
}

inline double weak_value(double alpha2, double delta) { return alpha2 / 2.0 + weak_value_one_photon(delta); }

inline double q_wva(const Inputs& in) { return in.kick() * weak_value(in.alpha2, in.delta); }

/// Perturbative; values above 1 are returned as-is and flagged by the caller.
inline double p_success(const Inputs& in) {
    const double a = in.disp_abs();
    return in.alpha2 * (in.delta * in.delta + a * a / 4.0);
}

inline double p_success_wva(double alpha2, double delta) { return alpha2 * delta * delta; }

inline double alpha2_for_probability(double p_target, double k, double wm_t, double delta) {
    const double a = evolution_params(k, 0.0, wm_t).disp_abs();
    const double den = delta * delta + a * a / 4.0;
    if (den == 0.0) throw DomainError("alpha2_for_probability: delta = phi = 0");
    return p_target / den;
}

/// Q = 1/(ϕ + ϕ*).
inline double amplification_factor_Q(double k, double wm_t) {
    const double kick = evolution_params(k, 0.0, wm_t).kick();
    if (kick == 0.0) throw DomainError("amplification factor diverges: phi + phi* = 0");
    return 1.0 / kick;
}

// Small-k expansion at ω_m t = π.
inline double q_click_smallk(double alpha2, double k, double delta) {
    return (2.0 * k * delta + 4.0 * k * k * k * alpha2) / (delta * delta + k * k);
}
inline double snr_click(double alpha2, double k) { return 1.0 + 2.0 * k * alpha2; }
inline double snr_diff() { return 1.0; }

/// Coherent amplitudes of the conditional mirror states.
struct MirrorAmplitudes {
    cplx click;
    cplx noclick;
};

inline MirrorAmplitudes mirror_states_closed_form(const Inputs& in) {
    if (in.delta == 0.0) throw DomainError("mirror_states_closed_form: delta = 0");
    const cplx phi = in.disp();
    const cplx classical = in.alpha2 * phi / 2.0;
    return {classical + phi / (2.0 * in.delta), classical};
}

inline double q_no_postselection(double k, double wm_t) { return 2.0 * k * (1.0 - std::cos(wm_t)); }

}  // namespace optoweak::analytic
