#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "optoweak/dynamics.hpp"
#include "test_util.hpp"

using namespace optoweak;
using optoweak::detail::max_abs;
using optoweak::testing::random_state;

namespace {

constexpr double kPi = std::numbers::pi;

// Padé exponential of −iHt with H built entry by entry from the Hamiltonian.
Matrix reference_propagator(const EvolutionParams& p, int co, int cm) {
    const Eigen::Index md = cm + 1;
    const Eigen::Index dim = (co + 1) * md;
    Matrix h = Matrix::Zero(dim, dim);
    for (int n = 0; n <= co; ++n) {
        for (int j = 0; j <= cm; ++j) {
            const Eigen::Index i = n * md + j;
            h(i, i) = p.r * n + j;
            if (j < cm) {
                h(i, i + 1) = -p.k * n * std::sqrt(j + 1.0);
                h(i + 1, i) = -p.k * n * std::sqrt(j + 1.0);
            }
        }
    }
    return Matrix((-kI * p.wm_t * h).exp());
}

}  // namespace

TEST(EvolutionParams, NoInteractionTime) {
    const EvolutionParams p = evolution_params(0.3, 1.0, 0.0);
    EXPECT_EQ(p.kerr_phase, 0.0);
    EXPECT_EQ(std::abs(p.disp), 0.0);
}

TEST(EvolutionParams, HalfPeriod) {
    const EvolutionParams p = evolution_params(0.005, 0.0, kPi);
    EXPECT_NEAR(p.disp.real(), 0.01, 1e-17);
    EXPECT_NEAR(p.disp.imag(), 0.0, 1e-17);
    EXPECT_NEAR(p.kick(), 0.02, 1e-17);
    EXPECT_NEAR(p.kerr_phase, 7.853981633974483e-05, 1e-18);
    EXPECT_NEAR(p.disp_abs(), 0.01, 1e-17);
}

TEST(EvolutionParams, RejectsNegativeInputs) {
    EXPECT_THROW(evolution_params(-0.1, 0.0, 1.0), DomainError);
    EXPECT_THROW(evolution_params(0.1, 0.0, -1.0), DomainError);
}

TEST(FactoredPropagate, ZeroTimeIsIdentity) {
    const StateVector psi = random_state(ModeLayout{{Mode::a, 3}, {Mode::b, 2}, {Mode::m, 6}});
    const StateVector out = factored_propagate(psi, evolution_params(0.1, 0.7, 0.0));
    EXPECT_LT((out.amplitudes() - psi.amplitudes()).norm(), 1e-14);
}

TEST(FactoredPropagate, VacuumUncoupled) {
    const StateVector vac = tensor(fock_state(Mode::a, 0, 3), fock_state(Mode::m, 0, 8));
    const StateVector out = factored_propagate(vac, evolution_params(0.1, 0.0, kPi));
    EXPECT_LT((out.amplitudes() - vac.amplitudes()).norm(), 1e-14);
}

TEST(FactoredPropagate, SinglePhotonDisplacesMirror) {
    const int cm = 20;
    const StateVector in = tensor(fock_state(Mode::a, 1, 1), fock_state(Mode::m, 0, cm));
    const StateVector out = factored_propagate(in, evolution_params(0.1, 0.0, kPi));
    const auto pr = project_fock(out, Mode::a, 1);
    EXPECT_NEAR(pr.probability, 1.0, 1e-12);
    const StateVector coh = coherent_state(Mode::m, 0.2, cm);
    EXPECT_NEAR(std::abs(coh.amplitudes().dot(pr.conditional.amplitudes())), 1.0, 1e-12);
    EXPECT_NEAR(expectation(pr.conditional, position(Mode::m, cm)).real(), 0.4, 1e-10);
}

TEST(FactoredPropagate, PreservesNorm) {
    const ModeLayout l{{Mode::a, 4}, {Mode::b, 2}, {Mode::m, 30}};
    for (int trial = 0; trial < 5; ++trial) {
        // random optical part, mirror in vacuum
        const StateVector ab = random_state(ModeLayout{{Mode::a, 4}, {Mode::b, 2}});
        const StateVector psi = tensor(ab, fock_state(Mode::m, 0, 30));
        const StateVector out = factored_propagate(psi, evolution_params(0.05, 0.3, 1.0 + trial));
        EXPECT_NEAR(out.norm(), 1.0, 1e-10);
        EXPECT_EQ(out.layout(), l);
    }
}

TEST(FactoredPropagate, MatchesPadeExponential) {
    // low-energy input on a generous mirror space so truncation of [c, c†]
    // cannot reach the compared amplitudes
    const int co = 3, cm = 40;
    const EvolutionParams p = evolution_params(0.1, 0.4, 2.2);
    const Matrix ref = reference_propagator(p, co, cm);
    const StateVector optical = random_state(ModeLayout{{Mode::a, co}});
    const StateVector psi = tensor(optical, fock_state(Mode::m, 0, cm));
    const StateVector out = factored_propagate(psi, p);
    EXPECT_LT((out.amplitudes() - ref * psi.amplitudes()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FactoredPropagate, CoupledModeSelectsFiber) {
    const int cm = 20;
    const StateVector in = tensor({fock_state(Mode::c, 0, 1), fock_state(Mode::d, 1, 1), fock_state(Mode::m, 0, cm)});
    const StateVector out = factored_propagate(in, evolution_params(0.1, 0.0, kPi), Mode::d);
    const Mode keep[] = {Mode::m};
    const DensityMatrix mirror = DensityMatrix::pure(out).partial_trace(keep);
    EXPECT_NEAR(expectation(mirror, position(Mode::m, cm)).real(), 0.4, 1e-10);
}

TEST(FactoredPropagate, RPhaseLeavesObservablesUnchanged) {
    const int cm = 16;
    const StateVector ab = random_state(ModeLayout{{Mode::a, 3}, {Mode::b, 3}});
    const StateVector psi = tensor(ab, fock_state(Mode::m, 0, cm));
    const StateVector with_r = factored_propagate(psi, evolution_params(0.05, 2.7, 1.3, true));
    const StateVector without = factored_propagate(psi, evolution_params(0.05, 2.7, 1.3, false));
    const Mode keep[] = {Mode::m};
    const Operator q = position(Mode::m, cm);
    EXPECT_NEAR(expectation(DensityMatrix::pure(with_r).partial_trace(keep), q).real(),
                expectation(DensityMatrix::pure(without).partial_trace(keep), q).real(), 1e-12);
    for (int n = 0; n <= 3; ++n) {
        EXPECT_NEAR(slice_fock(with_r, Mode::a, n).squared_norm(), slice_fock(without, Mode::a, n).squared_norm(),
                    1e-12);
    }
}

TEST(FactoredPropagate, MirrorCutoffTooSmall) {
    const StateVector in = tensor(fock_state(Mode::a, 3, 3), fock_state(Mode::m, 0, 2));
    EXPECT_THROW(factored_propagate(in, evolution_params(0.25, 0.0, kPi)), TruncationError);
}

TEST(FactoredPropagate, WarnsOutsideWeakCoupling) {
    Diagnostics diag;
    const StateVector in = tensor(fock_state(Mode::a, 1, 1), fock_state(Mode::m, 0, 30));
    (void)factored_propagate(in, evolution_params(0.2, 0.0, kPi), Mode::a, &diag);
    EXPECT_FALSE(diag.warnings.empty());
}

TEST(DensePropagator, ZeroTimeIsIdentity) {
    const Operator u = dense_propagator(evolution_params(0.1, 0.5, 0.0), 3, 7);
    EXPECT_LT(max_abs(u.matrix() - Matrix::Identity(32, 32)), 1e-13);
}

TEST(DensePropagator, DecoupledPhases) {
    const double r = 0.3, t = 1.7;
    const Operator u = dense_propagator(evolution_params(0.0, r, t), 3, 7);
    const ModeLayout& l = u.layout();
    Matrix expect = Matrix::Zero(32, 32);
    for (std::size_t i = 0; i < l.dimension(); ++i) {
        const auto occ = l.occupations(i);
        expect(i, i) = std::exp(-kI * ((r * occ[0] + occ[1]) * t));
    }
    EXPECT_LT(max_abs(u.matrix() - expect), 1e-12);
}

TEST(DensePropagator, AgreesWithPade) {
    const EvolutionParams p = evolution_params(0.1, 0.2, kPi);
    EXPECT_LT(max_abs(dense_propagator(p, 3, 7).matrix() - reference_propagator(p, 3, 7)), 1e-10);
}

TEST(DensePropagator, DimensionCap) {
    EXPECT_THROW(dense_propagator(evolution_params(0.1, 0.0, 1.0), 64, 64), DimensionCapError);
}

TEST(PropagatorEquivalence, FactoredMatchesDense) {
    for (double k : {0.01, 0.05, 0.1}) {
        for (double t : {0.3, kPi / 2, kPi, 4.0, 2 * kPi}) {
            EXPECT_LT(propagator_deviation(evolution_params(k, 0.0, t), 3, 7), 1e-8) << "k " << k << " t " << t;
        }
    }
}

TEST(PropagatorEquivalence, GuardLevelsAreNeeded) {
    // on the bare truncated space the top mirror level breaks [c, c†] = 1
    const EvolutionParams p = evolution_params(0.1, 0.0, kPi);
    EXPECT_GT(propagator_deviation(p, 3, 7, 0), 1e-4);
}

TEST(PropagatorEquivalence, WrongOrderIsDetected) {
    // D(nϕ) applied after instead of before the free rotation
    const EvolutionParams p = evolution_params(0.1, 0.0, 2.0);
    const int co = 3, cm = 30;
    const Matrix dense = dense_propagator(p, co, cm).matrix();
    const Eigen::Index md = cm + 1;
    double worst = 0.0;
    for (int n = 1; n <= co; ++n) {
        Vector free(md);
        for (int j = 0; j < md; ++j) free(j) = std::exp(-kI * (p.wm_t * j));
        const Matrix swapped = std::exp(kI * (p.kerr_phase * n * n)) * Matrix(free.asDiagonal()) *
                               displacement(Mode::m, double(n) * p.disp, cm).matrix();
        worst = std::max(worst, (dense.block(n * md, n * md, 5, 5) - swapped.block(0, 0, 5, 5)).cwiseAbs().maxCoeff());
    }
    EXPECT_GT(worst, 1e-3);
}

TEST(WeakApprox, IdentityLimits) {
    const ModeLayout l{{Mode::c, 3}, {Mode::d, 2}, {Mode::m, 4}};
    const StateVector psi = random_state(l);
    const StateVector no_disp = weak_approx_propagate(psi, evolution_params(0.1, 0.0, 0.0), 1.0);
    EXPECT_LT((no_disp.amplitudes() - psi.amplitudes()).norm(), 1e-14);
    const StateVector no_light = weak_approx_propagate(psi, evolution_params(0.1, 0.0, kPi), 0.0);
    EXPECT_LT((no_light.amplitudes() - psi.amplitudes()).norm(), 1e-14);
}

TEST(WeakApprox, MatchesPadeExponential) {
    const int cc = 4, cd = 3, cm = 5;
    const ModeLayout l{{Mode::c, cc}, {Mode::d, cd}, {Mode::m, cm}};
    const EvolutionParams p = evolution_params(0.05, 0.6, 2.0);
    const cplx alpha{1.3, 0.4};
    const Operator ac = creation(Mode::c, cc), ad = creation(Mode::d, cd);
    const Matrix c = annihilation(Mode::m, cm).matrix();
    const Operator kick(ModeLayout{{Mode::m, cm}}, p.disp * c.adjoint() - std::conj(p.disp) * c);
    const Operator id_c = identity(ModeLayout{{Mode::c, cc}}), id_d = identity(ModeLayout{{Mode::d, cd}});
    const Matrix g = 0.5 * alpha * std::exp(-kI * (p.r * p.wm_t)) *
                     (kron(kron(ac, id_d), kick).matrix() + kron(kron(id_c, ad), kick).matrix());
    const StateVector psi = random_state(l);
    const Vector ref = g.exp() * psi.amplitudes();
    const StateVector out = weak_approx_propagate(psi, p, alpha);
    EXPECT_LT((out.amplitudes() - ref).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(WeakApprox, RequiresCdmLayout) {
    const StateVector psi = random_state(ModeLayout{{Mode::a, 2}, {Mode::m, 2}});
    EXPECT_THROW(weak_approx_propagate(psi, evolution_params(0.1, 0.0, 1.0), 1.0), LayoutError);
}

TEST(SinglePhoton, NoPostselectionDisplacementBound) {
    const int cm = 30;
    const Operator q = position(Mode::m, cm);
    const DensityMatrix vac = DensityMatrix::pure(fock_state(Mode::m, 0, cm));
    for (double k : {0.005, 0.1, 0.25}) {
        double peak = 0.0;
        for (int j = 0; j <= 64; ++j) {
            const double t = 2 * kPi * j / 64;
            const StateVector out =
                factored_propagate(tensor(fock_state(Mode::a, 1, 1), fock_state(Mode::m, 0, cm)), evolution_params(k, 0.0, t));
            const Mode keep[] = {Mode::m};
            const double shift = pointer_shift(DensityMatrix::pure(out).partial_trace(keep), vac, q);
            EXPECT_NEAR(shift, 2 * k * (1 - std::cos(t)), 1e-10);
            peak = std::max(peak, shift);
        }
        EXPECT_NEAR(peak, 4 * k, 1e-10);
    }
}
