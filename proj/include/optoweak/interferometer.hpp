#pragma once
// Mach–Zehnder protocol: preselection, optomechanical interaction in arm a,
// imbalanced second beam splitter, dark-port (d) photon counting.
//
// Sign convention: θ = π/4 + δ. With equal arm inputs the dark-port amplitude
// is α sin δ, so δ > 0 gives a positive one-photon weak value 1/(2δ).

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "optoweak/dynamics.hpp"
#include "optoweak/fock.hpp"

namespace optoweak {

/// Smallest cutoff whose Poisson(|α|²) tail is below 1e-12, and at least
/// ceil(|α|² + 6√max(|α|², 1)). A mode holding the full drive intensity then
/// stays well inside every leakage tolerance.
inline int default_optical_cutoff(double alpha2) {
    int n = static_cast<int>(std::ceil(alpha2 + 6.0 * std::sqrt(std::max(alpha2, 1.0))));
    while (truncation_leakage(alpha2, n) > 1e-12) ++n;
    return n;
}

inline constexpr int kDefaultMirrorCutoff = 10;

struct ProtocolParams {
    cplx alpha{0.0, 0.0};  ///< drive amplitude, |α|² = mean photon number
    double delta = 0.0;    ///< θ − π/4
    EvolutionParams evolution;
    ModeLayout cutoffs;    ///< {a, b, m}; c and d inherit the a and b cutoffs
    int dark_port_max_click = 1;

    double alpha2() const { return std::norm(alpha); }
    double theta() const { return std::numbers::pi / 4.0 + delta; }
    int optical_cutoff() const { return cutoffs.cutoff(Mode::a); }
    int mirror_cutoff() const { return cutoffs.cutoff(Mode::m); }
};

inline ProtocolParams protocol_params(cplx alpha, double delta, const EvolutionParams& evolution,
                                      int optical_cutoff = -1, int mirror_cutoff = kDefaultMirrorCutoff,
                                      int dark_port_max_click = 1) {
    if (!(std::abs(delta) < std::numbers::pi / 4.0)) throw DomainError("protocol: |delta| must be < pi/4");
    if (optical_cutoff < 0) optical_cutoff = default_optical_cutoff(std::norm(alpha));
    if (mirror_cutoff < 1) throw DomainError("protocol: mirror cutoff must be >= 1");
    if (dark_port_max_click < 1 || dark_port_max_click > optical_cutoff) {
        throw DomainError("protocol: dark_port_max_click must be in [1, optical cutoff]");
    }
    ProtocolParams p;
    p.alpha = alpha;
    p.delta = delta;
    p.evolution = evolution;
    p.cutoffs = ModeLayout{{Mode::a, optical_cutoff}, {Mode::b, optical_cutoff}, {Mode::m, mirror_cutoff}};
    p.dark_port_max_click = dark_port_max_click;
    return p;
}

inline void regime_warnings(const ProtocolParams& p, Diagnostics* diag, const Tolerances& tol = kTolerances) {
    const double small = p.alpha2() * p.delta * p.delta;
    if (small > tol.small_signal_warn) {
        warn(diag, "|alpha|^2 delta^2 = " + std::to_string(small) + " is not << 1");
    }
    if (p.evolution.disp_abs() > tol.weak_coupling_warn) {
        warn(diag, "|phi| = " + std::to_string(p.evolution.disp_abs()) + " is not << 1");
    }
}

/// Statistics of one dark-port outcome.
struct Branch {
    int clicks = 0;
    double probability = 0.0;
    double q = 0.0;   ///< ⟨q⟩/σ shift relative to the initial mirror vacuum
    double dq = 0.0;  ///< Δq/σ
    DensityMatrix mirror{ModeLayout{{Mode::m, 0}}, Matrix::Identity(1, 1)};
};

struct ProtocolOutcome {
    double p_click = 0.0;
    double p_noclick = 0.0;
    double p_multi = 0.0;  ///< residual probability of ≥ 2 dark-port photons
    std::optional<Branch> click;
    std::optional<Branch> noclick;
    std::vector<Branch> higher;  ///< non-degenerate branches n = 2..dark_port_max_click
    std::vector<std::string> warnings;

    double q_click() const { return require(click, "click").q; }
    double q_noclick() const { return require(noclick, "no-click").q; }
    double dq_click() const { return require(click, "click").dq; }
    double dq_noclick() const { return require(noclick, "no-click").dq; }
    double diff() const { return q_click() - q_noclick(); }

private:
    static const Branch& require(const std::optional<Branch>& b, const char* name) {
        if (!b) throw DegenerateBranchError(std::string(name) + " branch has zero probability", 0.0);
        return *b;
    }
};

/// |α/√2⟩_a ⊗ |α/√2⟩_b ⊗ |0⟩_m, renormalized after the leakage check.
inline StateVector preselect(const ProtocolParams& p, const Tolerances& tol = kTolerances) {
    const cplx arm = p.alpha / std::numbers::sqrt2;
    const StateVector a = coherent_state(Mode::a, arm, p.cutoffs.cutoff(Mode::a), tol.preselect_leakage);
    const StateVector b = coherent_state(Mode::b, arm, p.cutoffs.cutoff(Mode::b), tol.preselect_leakage);
    const StateVector m = fock_state(Mode::m, 0, p.mirror_cutoff());
    const StateVector joint = tensor({a, b, m});
    return joint.normalized();
}

/// Two-mode unitary realizing a_out1 = cosθ a_1 + sinθ a_2, a_out2 = sinθ a_1 − cosθ a_2:
/// the rotation exp[θ(a_1†a_2 − a_1 a_2†)] followed by e^{iπ n_2}.
inline Operator beam_splitter(double theta, int cutoff_first, int cutoff_second, Mode first = Mode::a,
                              Mode second = Mode::b) {
    const Operator a1 = annihilation(first, cutoff_first);
    const Operator a2 = annihilation(second, cutoff_second);
    const Operator i1 = identity(a1.layout());
    const Operator i2 = identity(a2.layout());
    const Matrix hop = kron(a1.adjoint(), a2).matrix();  // a_1† a_2
    const Matrix generator = theta * (hop - hop.adjoint());
    const Matrix rotation = hermitian_exponential(kI * generator, 1.0);
    Vector flip(cutoff_second + 1);
    for (int n = 0; n <= cutoff_second; ++n) flip(n) = (n % 2 == 0) ? 1.0 : -1.0;
    const Operator flip_op(a2.layout(), Matrix(flip.asDiagonal()));
    Operator u(a1.layout().concat(a2.layout()), kron(i1, flip_op).matrix() * rotation);
    if (!u.is_unitary()) throw TruncationError("beam_splitter: unitarity check failed", u.unitary_deviation());
    return u;
}

namespace detail {

/// Statistics from the unnormalized conditional mirror state; its trace is the
/// branch probability.
inline std::optional<Branch> branch_from_mirror(const DensityMatrix& mirror, int clicks, const Tolerances& tol) {
    const double p = mirror.trace();
    if (p < tol.degenerate_probability) return std::nullopt;
    const int cm = mirror.layout().cutoff(Mode::m);
    const Operator q = position(Mode::m, cm);
    const Operator q2(q.layout(), q.matrix() * q.matrix());
    const DensityMatrix vacuum = DensityMatrix::pure(fock_state(Mode::m, 0, cm));
    Branch b;
    b.clicks = clicks;
    b.probability = p;
    b.q = pointer_shift(mirror, vacuum, q, tol);
    const double mean = expectation(mirror, q, tol).real() / p;
    const double second = expectation(mirror, q2, tol).real() / p;
    b.dq = std::sqrt(std::max(0.0, second - mean * mean));
    b.mirror = mirror.normalized();
    return b;
}

inline std::optional<Branch> dark_port_branch(const StateVector& out, int clicks, const Tolerances& tol) {
    const Mode keep[] = {Mode::m};
    return branch_from_mirror(DensityMatrix::pure(slice_fock(out, Mode::d, clicks)).partial_trace(keep), clicks, tol);
}

}  // namespace detail

/// Dark-port statistics of a state over {c, d, m}. Probabilities are divided
/// by the total squared norm of `out`.
inline ProtocolOutcome postselect_dark_port(const StateVector& out, int max_click,
                                            const Tolerances& tol = kTolerances) {
    const double total = out.squared_norm();
    if (total < tol.degenerate_probability) throw DegenerateBranchError("postselect: zero state", total);
    const StateVector unit = out.normalized();
    ProtocolOutcome res;
    res.noclick = detail::dark_port_branch(unit, 0, tol);
    res.p_noclick = res.noclick ? res.noclick->probability : 0.0;
    res.click = detail::dark_port_branch(unit, 1, tol);
    res.p_click = res.click ? res.click->probability : 0.0;
    for (int n = 2; n <= max_click; ++n) {
        if (auto b = detail::dark_port_branch(unit, n, tol)) res.higher.push_back(std::move(*b));
    }
    res.p_multi = std::max(0.0, 1.0 - res.p_noclick - res.p_click);
    return res;
}

/// Full exact pipeline: preselect → factored propagation on arm a →
/// beam_splitter(π/4 + δ) with (a, b) → (c, d) → dark-port projection.
inline ProtocolOutcome run_protocol(const ProtocolParams& p, const Tolerances& tol = kTolerances) {
    Diagnostics diag;
    regime_warnings(p, &diag, tol);
    StateVector psi = preselect(p, tol);
    psi = factored_propagate(psi, p.evolution, Mode::a, &diag, tol);
    const int co = p.optical_cutoff();
    const Operator bs = beam_splitter(p.theta(), co, p.cutoffs.cutoff(Mode::b));
    psi = apply(bs, psi).relabeled(Mode::a, Mode::c).relabeled(Mode::b, Mode::d);
    ProtocolOutcome res = postselect_dark_port(psi, p.dark_port_max_click, tol);
    res.warnings = std::move(diag.warnings);
    return res;
}

/// Same dark-port statistics, but with the light–mirror state produced by the
/// weak-interaction operator acting on |α⟩_c|δα⟩_d|0⟩_m (phases e^{−irω_m t}
/// included when enabled).
inline ProtocolOutcome weak_approx_protocol(const ProtocolParams& p, const Tolerances& tol = kTolerances) {
    Diagnostics diag;
    regime_warnings(p, &diag, tol);
    const EvolutionParams& evo = p.evolution;
    const cplx phase = evo.include_r_phase ? std::exp(-kI * (evo.r * evo.wm_t)) : cplx{1.0, 0.0};
    const int co = p.optical_cutoff();
    const StateVector c = coherent_state(Mode::c, p.alpha * phase, co, tol.preselect_leakage);
    const StateVector d = coherent_state(Mode::d, p.delta * p.alpha * phase, p.cutoffs.cutoff(Mode::b),
                                         tol.preselect_leakage);
    const StateVector m = fock_state(Mode::m, 0, p.mirror_cutoff());
    const StateVector in = tensor({c, d, m});
    const StateVector out = weak_approx_propagate(in, evo, p.alpha, &diag, tol);
    ProtocolOutcome res = postselect_dark_port(out, p.dark_port_max_click, tol);
    res.warnings = std::move(diag.warnings);
    return res;
}

/// ⟨ψ_f|a_a†a_a|ψ_i⟩/⟨ψ_f|ψ_i⟩ with |ψ_i⟩ = |γ_c⟩|γ_d⟩, |ψ_f⟩ = |γ_c⟩|1⟩_d,
/// γ_c = α(cosθ + sinθ)/√2, γ_d = α(sinθ − cosθ)/√2, and
/// a_a†a_a = cos²θ n_c + cosθ sinθ (a_c†a_d + a_c a_d†) + sin²θ n_d.
inline double weak_value_numeric(const ProtocolParams& p, Diagnostics* diag = nullptr,
                                 const Tolerances& tol = kTolerances) {
    const double th = p.theta();
    const double cs = std::cos(th);
    const double sn = std::sin(th);
    const EvolutionParams& evo = p.evolution;
    const cplx phase = evo.include_r_phase ? std::exp(-kI * (evo.r * evo.wm_t)) : cplx{1.0, 0.0};
    const cplx gc = p.alpha * phase * (cs + sn) / std::numbers::sqrt2;
    const cplx gd = p.alpha * phase * (sn - cs) / std::numbers::sqrt2;
    const int cc = std::max(p.optical_cutoff(), default_optical_cutoff(std::norm(gc)));
    const int cd = std::max(p.cutoffs.cutoff(Mode::b), default_optical_cutoff(std::norm(gd)));
    if (p.delta > std::numbers::pi / 8.0) {
        warn(diag, "weak_value_numeric: delta near pi/4, asymptotic form |alpha|^2/2 + 1/(2 delta) breaks down");
    }

    const StateVector c_state = coherent_state(Mode::c, gc, cc, tol.preselect_leakage);
    const StateVector psi_i = tensor(c_state, coherent_state(Mode::d, gd, cd, tol.preselect_leakage));
    const StateVector psi_f = tensor(c_state, fock_state(Mode::d, 1, cd));

    const Operator ac = annihilation(Mode::c, cc);
    const Operator ad = annihilation(Mode::d, cd);
    const Operator nc = number(Mode::c, cc);
    const Operator nd = number(Mode::d, cd);
    const Vector& v = psi_i.amplitudes();
    const Vector na_psi = cs * cs * apply(nc, psi_i).amplitudes() +
                          cs * sn * apply(ac.adjoint(), apply(ad, psi_i)).amplitudes() +
                          cs * sn * apply(ac, apply(ad.adjoint(), psi_i)).amplitudes() +
                          sn * sn * apply(nd, psi_i).amplitudes();
    const cplx overlap = psi_f.amplitudes().dot(v);
    if (std::abs(overlap) < tol.degenerate_probability) {
        throw DegenerateBranchError("weak_value_numeric: vanishing overlap <psi_f|psi_i>", std::abs(overlap));
    }
    const cplx value = psi_f.amplitudes().dot(na_psi) / overlap;
    if (p.alpha.imag() == 0.0 && std::abs(value.imag()) > tol.weak_value_imag) {
        throw ToleranceError("weak_value_numeric: imaginary part " + std::to_string(value.imag()) +
                             " for real alpha");
    }
    return value.real();
}

}  // namespace optoweak
