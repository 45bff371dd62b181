#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "optoweak/dissipation.hpp"
#include "test_util.hpp"

using namespace optoweak;
using optoweak::detail::max_abs;
using optoweak::testing::random_density;

namespace {

constexpr double kPi = std::numbers::pi;

ProtocolParams small_desk(double delta, double k = 0.005, int co = 8, int cm = 5) {
    return protocol_params(std::sqrt(0.5), delta, evolution_params(k, 0.0, kPi), co, cm);
}

double mirror_number(const DensityMatrix& rho) {
    const Mode keep[] = {Mode::m};
    const DensityMatrix m = rho.partial_trace(keep);
    return expectation(m, number(Mode::m, m.layout().cutoff(Mode::m))).real();
}

}  // namespace

TEST(LindbladRhs, TracelessAndHermitian) {
    const ModeLayout layout{{Mode::a, 3}, {Mode::m, 5}};
    for (double gamma : {0.0, 0.3}) {
        const auto params = lindblad_params(gamma, evolution_params(0.2, 0.7, kPi));
        for (int i = 0; i < 5; ++i) {
            const Matrix d = lindblad_rhs(random_density(layout), params).matrix();
            EXPECT_LT(std::abs(d.trace()), 1e-12);
            EXPECT_LT(max_abs(d - d.adjoint()), 1e-12);
        }
    }
}

TEST(LindbladRhs, StationaryStates) {
    // vacuum of both modes is fixed by damping and by H at n = 0
    const ModeLayout layout{{Mode::a, 2}, {Mode::m, 4}};
    const StateVector vac = tensor(fock_state(Mode::a, 0, 2), fock_state(Mode::m, 0, 4));
    const auto damped = lindblad_params(0.4, evolution_params(0.3, 0.0, 1.0));
    EXPECT_LT(max_abs(lindblad_rhs(DensityMatrix::pure(vac), damped).matrix()), 1e-15);

    // an eigenvector of H commutes with it
    const EvolutionParams p = evolution_params(0.3, 0.2, 1.0);
    const Matrix h = optomechanical_hamiltonian(p, 2, 4);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const StateVector eig(layout, Vector(es.eigenvectors().col(3)));
    EXPECT_LT(max_abs(lindblad_rhs(DensityMatrix::pure(eig), lindblad_params(0.0, p)).matrix()), 1e-12);
}

TEST(LindbladRhs, RejectsLayout) {
    const auto params = lindblad_params(0.1, evolution_params(0.1, 0.0, 1.0));
    const DensityMatrix wrong_order = DensityMatrix::pure(tensor(fock_state(Mode::m, 0, 3), fock_state(Mode::a, 0, 2)));
    EXPECT_THROW(lindblad_rhs(wrong_order, params), LayoutError);
    const DensityMatrix three = DensityMatrix::pure(
        tensor({fock_state(Mode::a, 0, 2), fock_state(Mode::b, 0, 2), fock_state(Mode::m, 0, 3)}));
    EXPECT_THROW(evolve_master(three, params, 1.0), LayoutError);
}

TEST(LindbladParams, Validation) {
    const EvolutionParams p = evolution_params(0.1, 0.0, 1.0);
    EXPECT_THROW(lindblad_params(-1e-3, p), DomainError);
    EXPECT_THROW(lindblad_params(0.1, p, 0), DomainError);
    EXPECT_THROW(evolve_master(DensityMatrix::pure(tensor(fock_state(Mode::a, 0, 1), fock_state(Mode::m, 0, 2))),
                               lindblad_params(0.1, p), -1.0),
                 DomainError);
}

TEST(EvolveMaster, UndampedMatchesUnitary) {
    const ModeLayout layout{{Mode::a, 4}, {Mode::m, 10}};
    const EvolutionParams p = evolution_params(0.05, 0.4, kPi);
    const StateVector psi =
        tensor(coherent_state(Mode::a, cplx(0.8, 0.3), 4, 1e-3).normalized(), fock_state(Mode::m, 0, 10));
    const MasterResult res = evolve_master(DensityMatrix::pure(psi), lindblad_params(0.0, p, 1000), p.wm_t);
    const DensityMatrix expect = DensityMatrix::pure(factored_propagate(psi, p));
    EXPECT_LT(trace_distance(res.rho, expect), 1e-8);
    EXPECT_EQ(res.steps, 2000u);
    EXPECT_LT(res.step_doubling_distance, 1e-8);
}

TEST(EvolveMaster, RelaxesToGroundState) {
    const StateVector psi = tensor(fock_state(Mode::a, 0, 1), fock_state(Mode::m, 2, 6));
    const double gamma = 0.5;
    for (double t : {2.0, 10.0, 20.0}) {
        const MasterResult res =
            evolve_master(DensityMatrix::pure(psi), lindblad_params(gamma, evolution_params(0.0, 0.0, t), 2000), t);
        EXPECT_NEAR(mirror_number(res.rho), 2.0 * std::exp(-gamma * t), 1e-9);
    }
    const MasterResult long_run =
        evolve_master(DensityMatrix::pure(psi), lindblad_params(gamma, evolution_params(0.0, 0.0, 20.0), 2000), 20.0);
    EXPECT_LT(mirror_number(long_run.rho), 1e-3);
    EXPECT_GE(long_run.min_eigenvalue, -1e-9);
}

TEST(EvolveMaster, TracePreservedUnderWeakDamping) {
    const ModeLayout layout{{Mode::a, 3}, {Mode::m, 6}};
    const MasterResult res =
        evolve_master(random_density(layout), lindblad_params(5e-7, evolution_params(0.05, 0.0, kPi), 2000), kPi);
    EXPECT_LT(res.max_trace_drift, 1e-10);
    EXPECT_LT(res.max_hermiticity_deviation, 1e-10);
}

TEST(EvolveMaster, StepDoublingFailureSuggestsMoreSteps) {
    const StateVector psi = tensor(fock_state(Mode::a, 2, 3), fock_state(Mode::m, 0, 12));
    const auto params = lindblad_params(0.1, evolution_params(0.2, 0.0, kPi), 10);
    try {
        evolve_master(DensityMatrix::pure(psi), params, kPi);
        FAIL() << "expected ToleranceError";
    } catch (const ToleranceError& e) {
        EXPECT_EQ(e.suggested_steps(), 40u);
    }
    LindbladParams no_check = params;
    no_check.step_doubling = false;
    EXPECT_NO_THROW(evolve_master(DensityMatrix::pure(psi), no_check, kPi));
}

TEST(DampedProtocol, UndampedMatchesPureStatePipeline) {
    const ProtocolParams p = small_desk(0.01);
    const ProtocolOutcome pure = run_protocol(p);
    const ProtocolOutcome mixed = damped_protocol(p, 0.0);
    ASSERT_TRUE(pure.click && mixed.click && pure.noclick && mixed.noclick);
    EXPECT_NEAR(mixed.p_click, pure.p_click, 1e-8 * pure.p_click);
    EXPECT_NEAR(mixed.p_noclick, pure.p_noclick, 1e-8);
    EXPECT_NEAR(mixed.click->q, pure.click->q, 1e-8);
    EXPECT_NEAR(mixed.noclick->q, pure.noclick->q, 1e-8);
    EXPECT_NEAR(mixed.click->dq, pure.click->dq, 1e-6);
    EXPECT_NEAR(mixed.p_noclick + mixed.p_click + mixed.p_multi, 1.0, 1e-12);
}

TEST(DampedProtocol, DampingIsContinuousAndShrinksSignal) {
    const ProtocolParams p = small_desk(0.005);
    const double q0 = damped_protocol(p, 0.0).diff();
    const double q1 = damped_protocol(p, 1e-2).diff();
    const double q2 = damped_protocol(p, 2e-2).diff();
    EXPECT_LT(q1, q0);
    EXPECT_LT(q2, q1);
    // first-order response: doubling γ doubles the change
    EXPECT_NEAR((q0 - q2) / (q0 - q1), 2.0, 0.1);
    EXPECT_LT(std::abs(q0 - q1), 0.05 * std::abs(q0));
}

TEST(DampedProtocol, ReportsIntegratorDiagnostics) {
    const DampedOutcome d = damped_protocol_detailed(small_desk(0.01), 1e-3);
    EXPECT_EQ(d.evolution.steps, 4000u);
    EXPECT_LT(d.evolution.step_doubling_distance, 1e-8);
    EXPECT_LT(d.evolution.max_trace_drift, 1e-10);
    EXPECT_GE(d.evolution.min_eigenvalue, -1e-9);
}

TEST(EvolveMaster, RejectsSmallMirrorCutoff) {
    const StateVector psi = tensor(fock_state(Mode::a, 3, 3), fock_state(Mode::m, 0, 1));
    EXPECT_THROW(evolve_master(DensityMatrix::pure(psi), lindblad_params(1e-3, evolution_params(0.05, 0.0, kPi), 50), kPi),
                 TruncationError);
    EXPECT_THROW(damped_protocol(small_desk(0.01, 0.005, 8, 1), 1e-3), TruncationError);
}
