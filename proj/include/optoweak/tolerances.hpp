#pragma once

#include <cstddef>

namespace optoweak {

/// Numerical thresholds used across the library. Every check that compares a
/// floating quantity against a bound reads it from here.
struct Tolerances {
    double normalization = 1e-12;        ///< |norm² − 1| after normalize
    double hermitian = 1e-10;            ///< ‖M − M†‖_max for the hermitian flag
    double unitary = 1e-9;               ///< ‖MM† − I‖_max for the unitary flag
    double coherent_leakage = 1e-10;     ///< default coherent_state leakage bound
    double preselect_leakage = 1e-9;     ///< per-arm leakage bound for preselection
    double mirror_leakage = 1e-9;        ///< population-weighted displacement tail bound
    double degenerate_probability = 1e-300;
    double expectation_imag = 1e-10;     ///< Im part allowed for Hermitian expectations
    double weak_value_imag = 1e-8;
    double density_trace = 1e-9;
    double density_hermitian = 1e-10;
    double density_min_eigenvalue = -1e-9;
    double series_term = 1e-14;          ///< Taylor series stopping criterion
    double step_doubling = 1e-8;         ///< trace distance between h and h/2 runs
    std::size_t dense_dimension_cap = 4096;

    // Perturbative-regime warning thresholds.
    double weak_coupling_warn = 0.1;     ///< |ϕ|
    double small_signal_warn = 0.1;      ///< |α|²δ²
    double smallk_warn = 0.2;            ///< k|α|²
};

inline constexpr Tolerances kTolerances{};

}  // namespace optoweak
