#pragma once
// Optomechanical time evolution, H/ω_m = r·n + c†c − k·n(c + c†), where n is
// the photon number of the coupled cavity mode and c the mirror.

#include <cmath>
#include <numbers>
#include <vector>

#include "optoweak/fock.hpp"

namespace optoweak {

struct EvolutionParams {
    double k = 0.0;            ///< scaled coupling g/ω_m
    double r = 0.0;            ///< ω_0/ω_m
    double wm_t = 0.0;         ///< ω_m t in radians
    double kerr_phase = 0.0;   ///< k²(ω_m t − sin ω_m t)
    cplx disp{0.0, 0.0};       ///< per-photon mirror displacement k(1 − e^{−iω_m t})
    bool include_r_phase = true;

    double disp_abs() const { return std::abs(disp); }
    /// ϕ + ϕ* = 2k(1 − cos ω_m t): single-photon position kick in σ units.
    double kick() const { return 2.0 * disp.real(); }
};

inline EvolutionParams evolution_params(double k, double r, double wm_t, bool include_r_phase = true) {
    if (!(k >= 0.0)) throw DomainError("evolution_params: k must be >= 0");
    if (!(wm_t >= 0.0)) throw DomainError("evolution_params: wm_t must be >= 0");
    EvolutionParams p;
    p.k = k;
    p.r = r;
    p.wm_t = wm_t;
    p.kerr_phase = k * k * (wm_t - std::sin(wm_t));
    p.disp = k * (1.0 - std::exp(-kI * wm_t));
    p.include_r_phase = include_r_phase;
    return p;
}

namespace detail {

/// e^{iφn²} D(nϕ) e^{−i ω_m t c†c} on the mirror for photon number n.
inline Matrix mirror_block(const EvolutionParams& p, int n, int mirror_cutoff) {
    Vector free(mirror_cutoff + 1);
    for (int j = 0; j <= mirror_cutoff; ++j) free(j) = std::exp(-kI * (p.wm_t * j));
    const cplx kerr = std::exp(kI * (p.kerr_phase * n * n));
    if (n == 0 || p.disp == cplx{0.0, 0.0}) return kerr * Matrix(free.asDiagonal());
    const Operator d = displacement(Mode::m, static_cast<double>(n) * p.disp, mirror_cutoff);
    return kerr * d.matrix() * free.asDiagonal();
}

inline double r_phase_angle(const EvolutionParams& p, int total_photons) {
    return p.include_r_phase ? -p.r * p.wm_t * total_photons : 0.0;
}

}  // namespace detail

/// Applies U = e^{−i r ω_m t N_opt} e^{iφn²} e^{n(ϕc† − ϕ*c)} e^{−iω_m t c†c}
/// (rightmost first) where n is the photon number of `coupled` and N_opt the
/// total photon number of all optical modes in the layout. Works fiber by
/// fiber on the mirror; the joint matrix is never formed.
inline StateVector factored_propagate(const StateVector& psi, const EvolutionParams& p, Mode coupled = Mode::a,
                                      Diagnostics* diag = nullptr, const Tolerances& tol = kTolerances) {
    const ModeLayout& layout = psi.layout();
    if (coupled == Mode::m) throw LayoutError("factored_propagate: coupled mode must be optical");
    const int co = layout.cutoff(coupled);
    const int cm = layout.cutoff(Mode::m);
    const std::size_t coupled_pos = layout.position(coupled);
    const std::size_t mirror_pos = layout.position(Mode::m);

    const Mode mirror_target[] = {Mode::m};
    const auto fi = detail::fiber_index(layout, mirror_target);
    const auto mdim = static_cast<Eigen::Index>(fi.inner.size());

    // Group optical configurations by coupled photon number.
    std::vector<std::vector<Eigen::Index>> groups(co + 1);
    std::vector<int> totals(fi.outer.size());
    for (std::size_t o = 0; o < fi.outer.size(); ++o) {
        const auto occ = layout.occupations(fi.outer[o]);
        int total = 0;
        for (std::size_t i = 0; i < occ.size(); ++i) {
            if (i != mirror_pos) total += occ[i];
        }
        totals[o] = total;
        groups[occ[coupled_pos]].push_back(static_cast<Eigen::Index>(o));
    }

    const Vector& in = psi.amplitudes();
    Vector out(in.size());
    const double norm2 = std::max(psi.squared_norm(), tol.degenerate_probability);
    double leakage = 0.0;
    for (int n = 0; n <= co; ++n) {
        const auto& group = groups[n];
        if (group.empty()) continue;
        Matrix x(mdim, static_cast<Eigen::Index>(group.size()));
        for (Eigen::Index g = 0; g < x.cols(); ++g) {
            const std::size_t base = fi.outer[group[g]];
            for (Eigen::Index j = 0; j < mdim; ++j) x(j, g) = in(static_cast<Eigen::Index>(base + fi.inner[j]));
        }
        const double population = x.squaredNorm();
        if (population > 0.0) {
            leakage += population / norm2 * truncation_leakage(std::norm(static_cast<double>(n) * p.disp), cm);
        }
        const Matrix y = detail::mirror_block(p, n, cm) * x;
        for (Eigen::Index g = 0; g < x.cols(); ++g) {
            const std::size_t base = fi.outer[group[g]];
            const cplx phase = std::exp(kI * detail::r_phase_angle(p, totals[group[g]]));
            for (Eigen::Index j = 0; j < mdim; ++j) out(static_cast<Eigen::Index>(base + fi.inner[j])) = phase * y(j, g);
        }
    }
    if (leakage > tol.mirror_leakage) {
        throw TruncationError("factored_propagate: mirror cutoff " + std::to_string(cm) +
                                  " too small for displacement n*|phi| up to " +
                                  std::to_string(co * p.disp_abs()),
                              leakage);
    }
    if (p.disp_abs() > tol.weak_coupling_warn) {
        warn(diag, "factored_propagate: |phi| = " + std::to_string(p.disp_abs()) + " is not small");
    }
    return StateVector(layout, std::move(out), psi.leakage() + leakage);
}

/// Joint matrix of the factored propagator on {a, m}; block diagonal in n_a.
/// Cross-validation only.
inline Operator factored_propagator(const EvolutionParams& p, int optical_cutoff, int mirror_cutoff) {
    const Eigen::Index md = mirror_cutoff + 1;
    const Eigen::Index dim = (optical_cutoff + 1) * md;
    Matrix u = Matrix::Zero(dim, dim);
    for (int n = 0; n <= optical_cutoff; ++n) {
        u.block(n * md, n * md, md, md) =
            std::exp(kI * detail::r_phase_angle(p, n)) * detail::mirror_block(p, n, mirror_cutoff);
    }
    return Operator(ModeLayout{{Mode::a, optical_cutoff}, {Mode::m, mirror_cutoff}}, std::move(u));
}

/// H/ω_m on {a, m}; the r term is dropped when include_r_phase is false.
inline Matrix optomechanical_hamiltonian(const EvolutionParams& p, int optical_cutoff, int mirror_cutoff) {
    const Matrix na = number(Mode::a, optical_cutoff).matrix();
    const Matrix c = annihilation(Mode::m, mirror_cutoff).matrix();
    const Matrix ia = Matrix::Identity(optical_cutoff + 1, optical_cutoff + 1);
    const Matrix im = Matrix::Identity(mirror_cutoff + 1, mirror_cutoff + 1);
    const Operator a_part(ModeLayout{{Mode::a, optical_cutoff}}, (p.include_r_phase ? p.r : 0.0) * na);
    const Operator m_part(ModeLayout{{Mode::m, mirror_cutoff}}, c.adjoint() * c);
    const Operator ia_op(ModeLayout{{Mode::a, optical_cutoff}}, ia);
    const Operator im_op(ModeLayout{{Mode::m, mirror_cutoff}}, im);
    const Operator na_op(ModeLayout{{Mode::a, optical_cutoff}}, na);
    const Operator x_op(ModeLayout{{Mode::m, mirror_cutoff}}, c + c.adjoint());
    return kron(a_part, im_op).matrix() + kron(ia_op, m_part).matrix() - p.k * kron(na_op, x_op).matrix();
}

/// exp(−i (H/ω_m) ω_m t) on the truncated {a, m} space by Hermitian
/// eigendecomposition.
inline Operator dense_propagator(const EvolutionParams& p, int optical_cutoff, int mirror_cutoff,
                                 std::size_t cap = kTolerances.dense_dimension_cap) {
    const std::size_t dim = static_cast<std::size_t>(optical_cutoff + 1) * static_cast<std::size_t>(mirror_cutoff + 1);
    if (dim > cap) throw DimensionCapError("dense_propagator", dim, cap);
    Operator u(ModeLayout{{Mode::a, optical_cutoff}, {Mode::m, mirror_cutoff}},
               hermitian_exponential(optomechanical_hamiltonian(p, optical_cutoff, mirror_cutoff), p.wm_t));
    if (!u.is_unitary()) throw TruncationError("dense_propagator: unitarity check failed", u.unitary_deviation());
    return u;
}

/// Max |U_dense − U_factored| over the (optical_cutoff, mirror_cutoff) block.
/// Both propagators are built with `guard_levels` extra mirror levels so the
/// compared block is free of edge effects of the truncated [c, c†].
inline double propagator_deviation(const EvolutionParams& p, int optical_cutoff, int mirror_cutoff,
                                   int guard_levels = 24) {
    const int padded = mirror_cutoff + guard_levels;
    const Matrix dense = dense_propagator(p, optical_cutoff, padded).matrix();
    const Matrix fact = factored_propagator(p, optical_cutoff, padded).matrix();
    const Eigen::Index pd = padded + 1;
    double worst = 0.0;
    for (int n = 0; n <= optical_cutoff; ++n) {
        for (int np = 0; np <= optical_cutoff; ++np) {
            const auto diff = dense.block(n * pd, np * pd, mirror_cutoff + 1, mirror_cutoff + 1) -
                              fact.block(n * pd, np * pd, mirror_cutoff + 1, mirror_cutoff + 1);
            worst = std::max(worst, diff.cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

/// Applies exp[α e^{−i r ω_m t}(a_c† + a_d†)(ϕc† − ϕ*c)/2] to a state over
/// {c, d, m} by a scaled Taylor series. Used to test the weak-interaction
/// approximation against the exact pipeline.
inline StateVector weak_approx_propagate(const StateVector& psi, const EvolutionParams& p, cplx alpha,
                                         Diagnostics* diag = nullptr, const Tolerances& tol = kTolerances) {
    const ModeLayout& layout = psi.layout();
    if (layout.dimension() > tol.dense_dimension_cap) {
        throw DimensionCapError("weak_approx_propagate", layout.dimension(), tol.dense_dimension_cap);
    }
    const int cc = layout.cutoff(Mode::c);
    const int cd = layout.cutoff(Mode::d);
    const int cm = layout.cutoff(Mode::m);
    if (p.disp_abs() > tol.weak_coupling_warn) {
        warn(diag, "weak_approx_propagate: |phi| = " + std::to_string(p.disp_abs()) + " exceeds 0.1");
    }
    const cplx prefactor = 0.5 * alpha * (p.include_r_phase ? std::exp(-kI * (p.r * p.wm_t)) : cplx{1.0, 0.0});
    const Operator up_c = creation(Mode::c, cc);
    const Operator up_d = creation(Mode::d, cd);
    const Matrix cmat = annihilation(Mode::m, cm).matrix();
    const Operator kick(ModeLayout{{Mode::m, cm}}, p.disp * cmat.adjoint() - std::conj(p.disp) * cmat);

    auto generator = [&](const Vector& v) {
        const StateVector s(layout, v);
        const StateVector x = apply(kick, s);
        return Vector(prefactor * (apply(up_c, x).amplitudes() + apply(up_d, x).amplitudes()));
    };

    const double bound = std::abs(prefactor) * (std::sqrt(double(cc)) + std::sqrt(double(cd))) * 2.0 *
                         p.disp_abs() * std::sqrt(double(cm));
    const int substeps = std::max(1, static_cast<int>(std::ceil(bound / 0.5)));
    constexpr int kMaxTerms = 400;

    Vector state = psi.amplitudes();
    for (int s = 0; s < substeps; ++s) {
        Vector term = state;
        Vector sum = state;
        int j = 1;
        for (;; ++j) {
            term = generator(term) / (static_cast<double>(j) * substeps);
            sum += term;
            const double tn = term.norm();
            if (tn < tol.series_term * std::max(1.0, sum.norm())) break;
            if (j >= kMaxTerms) throw ConvergenceError("weak_approx_propagate: series did not converge", tn);
        }
        state = std::move(sum);
    }
    return StateVector(layout, std::move(state), psi.leakage());
}

}  // namespace optoweak
