#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace optoweak {

enum class ErrorKind {
    layout,
    domain,
    truncation,
    degenerate_branch,
    dimension_cap,
    convergence,
    tolerance,
    config,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::layout: return "layout";
        case ErrorKind::domain: return "domain";
        case ErrorKind::truncation: return "truncation";
        case ErrorKind::degenerate_branch: return "degenerate-branch";
        case ErrorKind::dimension_cap: return "dimension-cap";
        case ErrorKind::convergence: return "convergence";
        case ErrorKind::tolerance: return "tolerance";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class LayoutError : public Error {
public:
    explicit LayoutError(const std::string& what) : Error(ErrorKind::layout, what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

/// Norm lost to a Fock cutoff exceeded the allowed bound.
class TruncationError : public Error {
public:
    TruncationError(const std::string& what, double leakage)
        : Error(ErrorKind::truncation, what + " (leakage " + std::to_string(leakage) + ")"),
          leakage_(leakage) {}
    double leakage() const noexcept { return leakage_; }

private:
    double leakage_;
};

/// A postselection branch with (numerically) zero probability.
class DegenerateBranchError : public Error {
public:
    DegenerateBranchError(const std::string& what, double probability)
        : Error(ErrorKind::degenerate_branch, what), probability_(probability) {}
    double probability() const noexcept { return probability_; }

private:
    double probability_;
};

class DimensionCapError : public Error {
public:
    DimensionCapError(const std::string& what, std::size_t dimension, std::size_t cap)
        : Error(ErrorKind::dimension_cap,
                what + " (dimension " + std::to_string(dimension) + " > cap " + std::to_string(cap) + ")"),
          dimension_(dimension) {}
    std::size_t dimension() const noexcept { return dimension_; }

private:
    std::size_t dimension_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_term_norm)
        : Error(ErrorKind::convergence, what + " (last term norm " + std::to_string(last_term_norm) + ")"),
          last_term_norm_(last_term_norm) {}
    double last_term_norm() const noexcept { return last_term_norm_; }

private:
    double last_term_norm_;
};

class ToleranceError : public Error {
public:
    ToleranceError(const std::string& what, std::size_t suggested_steps = 0)
        : Error(ErrorKind::tolerance, what), suggested_steps_(suggested_steps) {}
    /// Step count that is expected to satisfy the check, 0 if none applies.
    std::size_t suggested_steps() const noexcept { return suggested_steps_; }

private:
    std::size_t suggested_steps_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Collects non-fatal warnings (perturbative-regime violations and the like).
/// Passed explicitly; the library keeps no global state.
struct Diagnostics {
    std::vector<std::string> warnings;
    void warn(std::string message) { warnings.push_back(std::move(message)); }
};

inline void warn(Diagnostics* diag, std::string message) {
    if (diag != nullptr) diag->warn(std::move(message));
}

}  // namespace optoweak
