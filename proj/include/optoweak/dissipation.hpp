#pragma once
// Mechanical damping: dρ/dt = −i[H, ρ] + (γ/2)(2cρc† − c†cρ − ρc†c), with H the
// optomechanical Hamiltonian in ω_m units and γ = γ_m/ω_m.
//
// H is block diagonal in the photon number n of the optical mode, so the
// (n, n') mirror blocks of ρ evolve independently:
//     dX_{nn'} = A_n X + X A_{n'}† + γ c X c†,   A_n = −iH_n − (γ/2)c†c.

#include <algorithm>
#include <cmath>
#include <vector>

#include "optoweak/dynamics.hpp"
#include "optoweak/interferometer.hpp"

namespace optoweak {

struct LindbladParams {
    double gamma = 0.0;       ///< γ_m/ω_m
    EvolutionParams base;
    std::size_t steps = 2000; ///< RK4 steps over the integration interval
    bool step_doubling = true;
};

inline LindbladParams lindblad_params(double gamma, const EvolutionParams& base, std::size_t steps = 2000) {
    if (!(gamma >= 0.0)) throw DomainError("lindblad: gamma must be >= 0");
    if (steps == 0) throw DomainError("lindblad: step count must be positive");
    return {gamma, base, steps, true};
}

namespace detail {

class MirrorLindbladian {
public:
    MirrorLindbladian(const EvolutionParams& p, double gamma, int optical_cutoff, int mirror_cutoff, bool with_r)
        : gamma_(gamma), md_(mirror_cutoff + 1), optical_cutoff_(optical_cutoff) {
        c_ = annihilation(Mode::m, mirror_cutoff).matrix();
        cdag_ = c_.adjoint();
        const Matrix ncm = cdag_ * c_;
        const Matrix x = c_ + cdag_;
        const Matrix id = Matrix::Identity(md_, md_);
        for (int n = 0; n <= optical_cutoff; ++n) {
            const double rn = with_r && p.include_r_phase ? p.r * n : 0.0;
            const Matrix h = rn * id + ncm - p.k * n * x;
            a_.push_back(-kI * h - (gamma / 2.0) * ncm);
            a_dag_.push_back(a_.back().adjoint());
        }
    }

    Matrix operator()(const Matrix& rho) const {
        // A X by block rows, then X A† and γ c X c† by block columns.
        Matrix out(rho.rows(), rho.cols());
        for (int n = 0; n <= optical_cutoff_; ++n) {
            out.middleRows(n * md_, md_).noalias() = a_[n] * rho.middleRows(n * md_, md_);
        }
        Matrix cx;
        if (gamma_ != 0.0) {
            cx.resize(rho.rows(), rho.cols());
            for (int n = 0; n <= optical_cutoff_; ++n) {
                cx.middleRows(n * md_, md_).noalias() = gamma_ * c_ * rho.middleRows(n * md_, md_);
            }
        }
        for (int np = 0; np <= optical_cutoff_; ++np) {
            out.middleCols(np * md_, md_).noalias() += rho.middleCols(np * md_, md_) * a_dag_[np];
            if (gamma_ != 0.0) out.middleCols(np * md_, md_).noalias() += cx.middleCols(np * md_, md_) * cdag_;
        }
        return out;
    }

private:
    double gamma_;
    Eigen::Index md_;
    int optical_cutoff_;
    Matrix c_, cdag_;
    std::vector<Matrix> a_, a_dag_;
};

inline void check_lindblad_layout(const ModeLayout& layout) {
    if (layout.size() != 2 || layout.modes()[1].label != Mode::m || layout.modes()[0].label == Mode::m) {
        throw LayoutError("lindblad: expected layout {optical, m}, got " + layout.describe());
    }
}

}  // namespace detail

/// Right-hand side dρ/dt over {optical, m}; the r term is included when
/// base.include_r_phase is set.
inline DensityMatrix lindblad_rhs(const DensityMatrix& rho, const LindbladParams& params) {
    detail::check_lindblad_layout(rho.layout());
    const auto& modes = rho.layout().modes();
    const detail::MirrorLindbladian gen(params.base, params.gamma, modes[0].cutoff, modes[1].cutoff, true);
    return DensityMatrix(rho.layout(), gen(rho.matrix()));
}

struct MasterResult {
    DensityMatrix rho;
    std::size_t steps = 0;               ///< steps of the returned (finer) run
    double step_doubling_distance = 0.0; ///< trace distance between h and h/2 runs
    double max_trace_drift = 0.0;
    double max_hermiticity_deviation = 0.0;  ///< largest ‖ρ − ρ†‖ before re-symmetrizing
    double min_eigenvalue = 0.0;             ///< smallest eigenvalue seen at checkpoints
};

namespace detail {

inline MasterResult integrate_rk4(const DensityMatrix& rho0, const MirrorLindbladian& gen, double total_time,
                                  std::size_t steps) {
    const double h = total_time / static_cast<double>(steps);
    Matrix rho = rho0.matrix();
    const double trace0 = rho0.trace();
    MasterResult res{rho0, steps};
    res.min_eigenvalue = rho0.min_eigenvalue();
    const std::size_t checkpoint = std::max<std::size_t>(1, steps / 8);
    for (std::size_t s = 1; s <= steps; ++s) {
        const Matrix k1 = gen(rho);
        const Matrix k2 = gen(rho + (h / 2.0) * k1);
        const Matrix k3 = gen(rho + (h / 2.0) * k2);
        const Matrix k4 = gen(rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        res.max_hermiticity_deviation = std::max(res.max_hermiticity_deviation, max_abs(rho - rho.adjoint()));
        rho = 0.5 * (rho + rho.adjoint()).eval();
        res.max_trace_drift = std::max(res.max_trace_drift, std::abs(rho.trace().real() - trace0));
        if (s % checkpoint == 0 || s == steps) {
            res.min_eigenvalue = std::min(res.min_eigenvalue, DensityMatrix(rho0.layout(), rho).min_eigenvalue());
        }
    }
    res.rho = DensityMatrix(rho0.layout(), std::move(rho));
    return res;
}

}  // namespace detail

/// Fixed-step RK4 over `total_time` (units of 1/ω_m), repeated at half the
/// step; the runs must agree to tol.step_doubling in trace distance. The r
/// term commutes with everything and is applied exactly at the end.
inline MasterResult evolve_master(const DensityMatrix& rho0, const LindbladParams& params, double total_time,
                                  const Tolerances& tol = kTolerances) {
    detail::check_lindblad_layout(rho0.layout());
    if (!(total_time >= 0.0)) throw DomainError("evolve_master: total time must be >= 0");
    const int co = rho0.layout().modes()[0].cutoff;
    const int cm = rho0.layout().modes()[1].cutoff;

    // same population-weighted displacement tail as the unitary path
    const Eigen::Index md = cm + 1;
    const double total = std::max(rho0.trace(), tol.degenerate_probability);
    double leakage = 0.0;
    for (int n = 0; n <= co; ++n) {
        const double population = rho0.matrix().block(n * md, n * md, md, md).trace().real();
        if (population > 0.0) {
            leakage += population / total * truncation_leakage(std::norm(double(n) * params.base.disp), cm);
        }
    }
    if (leakage > tol.mirror_leakage) {
        throw TruncationError("evolve_master: mirror cutoff " + std::to_string(cm) +
                                  " too small for displacement n*|phi| up to " +
                                  std::to_string(co * params.base.disp_abs()),
                              leakage);
    }

    const detail::MirrorLindbladian gen(params.base, params.gamma, co, cm, false);
    MasterResult res = detail::integrate_rk4(rho0, gen, total_time, params.steps);
    if (params.step_doubling) {
        MasterResult fine = detail::integrate_rk4(rho0, gen, total_time, 2 * params.steps);
        const double dist = trace_distance(res.rho, fine.rho);
        if (dist > tol.step_doubling) {
            throw ToleranceError("evolve_master: step-doubling trace distance " + std::to_string(dist) +
                                     " exceeds " + std::to_string(tol.step_doubling) + "; use more steps",
                                 4 * params.steps);
        }
        fine.step_doubling_distance = dist;
        fine.max_trace_drift = std::max(fine.max_trace_drift, res.max_trace_drift);
        fine.max_hermiticity_deviation = std::max(fine.max_hermiticity_deviation, res.max_hermiticity_deviation);
        fine.min_eigenvalue = std::min(fine.min_eigenvalue, res.min_eigenvalue);
        res = std::move(fine);
    }

    if (params.base.include_r_phase && params.base.r != 0.0) {
        Matrix rho = res.rho.matrix();
        for (int n = 0; n <= co; ++n) {
            for (int np = 0; np <= co; ++np) {
                rho.block(n * md, np * md, md, md) *= std::exp(-kI * (params.base.r * total_time * (n - np)));
            }
        }
        res.rho = DensityMatrix(res.rho.layout(), std::move(rho));
    }
    return res;
}

struct DampedOutcome {
    ProtocolOutcome outcome;
    MasterResult evolution;  ///< integrator diagnostics of the a–m segment
};

/// Protocol with the a–m interaction evolved under the master equation. Arm b
/// is a spectator coherent state re-tensored before the second beam splitter;
/// dark-port postselection is a projector conjugation on the density matrix.
inline DampedOutcome damped_protocol_detailed(const ProtocolParams& p, double gamma, std::size_t steps = 2000,
                                              const Tolerances& tol = kTolerances) {
    Diagnostics diag;
    regime_warnings(p, &diag, tol);
    const EvolutionParams& evo = p.evolution;
    const int co = p.optical_cutoff();
    const int cb = p.cutoffs.cutoff(Mode::b);
    const int cm = p.mirror_cutoff();
    const cplx arm = p.alpha / std::numbers::sqrt2;

    const StateVector a0 = coherent_state(Mode::a, arm, co, tol.preselect_leakage);
    const StateVector am0 = tensor(a0, fock_state(Mode::m, 0, cm)).normalized();
    MasterResult evolved = evolve_master(DensityMatrix::pure(am0), lindblad_params(gamma, evo, steps), evo.wm_t, tol);

    const cplx b_phase = evo.include_r_phase ? std::exp(-kI * (evo.r * evo.wm_t)) : cplx{1.0, 0.0};
    const StateVector b0 = coherent_state(Mode::b, arm * b_phase, cb, tol.preselect_leakage).normalized();
    const Mode order[] = {Mode::a, Mode::b, Mode::m};
    DensityMatrix rho = permuted(tensor(evolved.rho, DensityMatrix::pure(b0)), order);

    rho = conjugate(beam_splitter(p.theta(), co, cb), rho).relabeled(Mode::a, Mode::c).relabeled(Mode::b, Mode::d);
    const double total = rho.trace();
    rho = DensityMatrix(rho.layout(), rho.matrix() / total);

    ProtocolOutcome res;
    const Mode keep[] = {Mode::m};
    res.noclick = detail::branch_from_mirror(slice_fock(rho, Mode::d, 0).partial_trace(keep), 0, tol);
    res.p_noclick = res.noclick ? res.noclick->probability : 0.0;
    res.click = detail::branch_from_mirror(slice_fock(rho, Mode::d, 1).partial_trace(keep), 1, tol);
    res.p_click = res.click ? res.click->probability : 0.0;
    for (int n = 2; n <= p.dark_port_max_click; ++n) {
        if (auto b = detail::branch_from_mirror(slice_fock(rho, Mode::d, n).partial_trace(keep), n, tol)) {
            res.higher.push_back(std::move(*b));
        }
    }
    res.p_multi = std::max(0.0, 1.0 - res.p_noclick - res.p_click);
    if (evolved.max_hermiticity_deviation > tol.density_hermitian) {
        diag.warn("damped_protocol: hermiticity deviation " + std::to_string(evolved.max_hermiticity_deviation) +
                  " before re-symmetrization");
    }
    res.warnings = std::move(diag.warnings);
    return {std::move(res), std::move(evolved)};
}

inline ProtocolOutcome damped_protocol(const ProtocolParams& p, double gamma, std::size_t steps = 2000,
                                       const Tolerances& tol = kTolerances) {
    return damped_protocol_detailed(p, gamma, steps, tol).outcome;
}

}  // namespace optoweak
