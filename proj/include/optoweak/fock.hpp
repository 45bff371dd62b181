#pragma once
// Multi-mode truncated Fock-space algebra.
//
// Basis ordering: a joint basis index enumerates occupation tuples with the
// LAST listed mode varying fastest,
//     index = Σ_i n_i · stride_i,   stride_last = 1,  stride_i = stride_{i+1}·dim_{i+1}.
// All index arithmetic goes through ModeLayout and detail::fiber_index.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "optoweak/errors.hpp"
#include "optoweak/tolerances.hpp"

namespace optoweak {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx kI{0.0, 1.0};

/// Mode labels: cavity arms a, b; interferometer outputs c, d; mirror m.
enum class Mode : char { a = 'a', b = 'b', c = 'c', d = 'd', m = 'm' };

inline char to_char(Mode mode) { return static_cast<char>(mode); }

inline Mode mode_from_char(char ch) {
    switch (ch) {
        case 'a': return Mode::a;
        case 'b': return Mode::b;
        case 'c': return Mode::c;
        case 'd': return Mode::d;
        case 'm': return Mode::m;
        default: throw LayoutError(std::string("unknown mode label '") + ch + "'");
    }
}

struct ModeSpec {
    Mode label;
    int cutoff;  ///< highest retained occupation; dimension is cutoff + 1

    std::size_t dim() const { return static_cast<std::size_t>(cutoff) + 1; }
    bool operator==(const ModeSpec&) const = default;
};

class ModeLayout {
public:
    ModeLayout() = default;
    ModeLayout(std::initializer_list<ModeSpec> modes) : ModeLayout(std::vector<ModeSpec>(modes)) {}
    explicit ModeLayout(std::vector<ModeSpec> modes) : modes_(std::move(modes)) {
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            if (modes_[i].cutoff < 0) {
                throw LayoutError(std::string("negative cutoff for mode ") + to_char(modes_[i].label));
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (modes_[j].label == modes_[i].label) {
                    throw LayoutError(std::string("duplicate mode label ") + to_char(modes_[i].label));
                }
            }
        }
        strides_.assign(modes_.size(), 1);
        dimension_ = 1;
        for (std::size_t i = modes_.size(); i-- > 0;) {
            strides_[i] = dimension_;
            dimension_ *= modes_[i].dim();
        }
    }

    const std::vector<ModeSpec>& modes() const { return modes_; }
    std::size_t size() const { return modes_.size(); }
    std::size_t dimension() const { return dimension_; }

    bool contains(Mode label) const {
        return std::any_of(modes_.begin(), modes_.end(), [&](const ModeSpec& s) { return s.label == label; });
    }

    std::size_t position(Mode label) const {
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            if (modes_[i].label == label) return i;
        }
        throw LayoutError(std::string("mode ") + to_char(label) + " not in layout " + describe());
    }

    int cutoff(Mode label) const { return modes_[position(label)].cutoff; }
    std::size_t dim(Mode label) const { return modes_[position(label)].dim(); }
    std::size_t stride(Mode label) const { return strides_[position(label)]; }
    std::size_t stride_at(std::size_t pos) const { return strides_[pos]; }

    std::size_t index(std::span<const int> occupations) const {
        if (occupations.size() != modes_.size()) throw LayoutError("occupation tuple length mismatch");
        std::size_t idx = 0;
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            if (occupations[i] < 0 || occupations[i] > modes_[i].cutoff) {
                throw LayoutError("occupation outside cutoff for mode " + std::string(1, to_char(modes_[i].label)));
            }
            idx += static_cast<std::size_t>(occupations[i]) * strides_[i];
        }
        return idx;
    }
    std::size_t index(std::initializer_list<int> occupations) const {
        return index(std::span<const int>(occupations.begin(), occupations.size()));
    }

    std::vector<int> occupations(std::size_t idx) const {
        std::vector<int> occ(modes_.size());
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            occ[i] = static_cast<int>(idx / strides_[i]);
            idx %= strides_[i];
        }
        return occ;
    }

    std::vector<Mode> labels() const {
        std::vector<Mode> out;
        for (const auto& s : modes_) out.push_back(s.label);
        return out;
    }

    ModeLayout without(Mode label) const {
        std::vector<ModeSpec> rest;
        for (const auto& s : modes_) {
            if (s.label != label) rest.push_back(s);
        }
        if (rest.size() == modes_.size()) {
            throw LayoutError(std::string("mode ") + to_char(label) + " not in layout " + describe());
        }
        return ModeLayout(std::move(rest));
    }

    ModeLayout select(std::span<const Mode> labels) const {
        std::vector<ModeSpec> out;
        for (Mode l : labels) out.push_back(modes_[position(l)]);
        return ModeLayout(std::move(out));
    }

    ModeLayout relabel(Mode from, Mode to) const {
        std::vector<ModeSpec> out = modes_;
        out[position(from)].label = to;
        return ModeLayout(std::move(out));
    }

    ModeLayout concat(const ModeLayout& other) const {
        std::vector<ModeSpec> out = modes_;
        out.insert(out.end(), other.modes_.begin(), other.modes_.end());
        return ModeLayout(std::move(out));
    }

    std::string describe() const {
        std::string s = "{";
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            if (i) s += ",";
            s += to_char(modes_[i].label);
            s += ":" + std::to_string(modes_[i].cutoff);
        }
        return s + "}";
    }

    bool operator==(const ModeLayout& other) const { return modes_ == other.modes_; }

private:
    std::vector<ModeSpec> modes_;
    std::vector<std::size_t> strides_;
    std::size_t dimension_ = 1;
};

namespace detail {

/// Joint-index offsets of a sub-tensor. `inner` enumerates the target modes
/// (in the order given, last fastest); `outer` enumerates every remaining
/// mode of the full layout (in layout order). Joint index = inner[i] + outer[o].
struct FiberIndex {
    std::vector<std::size_t> inner;
    std::vector<std::size_t> outer;
};

inline std::vector<std::size_t> enumerate_offsets(const std::vector<std::pair<std::size_t, std::size_t>>& dims_strides) {
    std::vector<std::size_t> out{0};
    for (const auto& [dim, stride] : dims_strides) {
        std::vector<std::size_t> next;
        next.reserve(out.size() * dim);
        for (std::size_t o : out) {
            for (std::size_t j = 0; j < dim; ++j) next.push_back(o + j * stride);
        }
        out = std::move(next);
    }
    return out;
}

inline FiberIndex fiber_index(const ModeLayout& full, std::span<const Mode> targets) {
    std::vector<std::pair<std::size_t, std::size_t>> inner_ds;
    std::vector<bool> used(full.size(), false);
    for (Mode t : targets) {
        const std::size_t pos = full.position(t);
        if (used[pos]) throw LayoutError("target mode listed twice");
        used[pos] = true;
        inner_ds.emplace_back(full.modes()[pos].dim(), full.stride_at(pos));
    }
    std::vector<std::pair<std::size_t, std::size_t>> outer_ds;
    for (std::size_t pos = 0; pos < full.size(); ++pos) {
        if (!used[pos]) outer_ds.emplace_back(full.modes()[pos].dim(), full.stride_at(pos));
    }
    return {enumerate_offsets(inner_ds), enumerate_offsets(outer_ds)};
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// 1 − Σ_{n≤cutoff} e^{−μ} μⁿ/n!, clamped at 0: the norm a coherent state of
/// mean photon number μ loses to the cutoff.
inline double truncation_leakage(double mean, int cutoff) {
    if (mean <= 0.0) return 0.0;
    double term = std::exp(-mean);
    double sum = term;
    for (int n = 1; n <= cutoff; ++n) {
        term *= mean / n;
        sum += term;
    }
    return std::max(0.0, 1.0 - sum);
}

class StateVector {
public:
    StateVector(ModeLayout layout, Vector amplitudes, double leakage = 0.0)
        : layout_(std::move(layout)), amplitudes_(std::move(amplitudes)), leakage_(leakage) {
        if (static_cast<std::size_t>(amplitudes_.size()) != layout_.dimension()) {
            throw LayoutError("amplitude count " + std::to_string(amplitudes_.size()) +
                              " does not match layout " + layout_.describe());
        }
    }

    const ModeLayout& layout() const { return layout_; }
    const Vector& amplitudes() const { return amplitudes_; }
    /// Norm lost to cutoff boundaries while producing this state.
    double leakage() const { return leakage_; }

    cplx amplitude(std::initializer_list<int> occupations) const {
        return amplitudes_(static_cast<Eigen::Index>(layout_.index(occupations)));
    }

    double squared_norm() const { return amplitudes_.squaredNorm(); }
    double norm() const { return amplitudes_.norm(); }

    StateVector normalized() const {
        const double n = norm();
        if (n * n < kTolerances.degenerate_probability) {
            throw DegenerateBranchError("cannot normalize a zero state", n * n);
        }
        return StateVector(layout_, amplitudes_ / n, leakage_);
    }

    StateVector relabeled(Mode from, Mode to) const {
        return StateVector(layout_.relabel(from, to), amplitudes_, leakage_);
    }

    StateVector with_leakage(double leakage) const { return StateVector(layout_, amplitudes_, leakage); }

private:
    ModeLayout layout_;
    Vector amplitudes_;
    double leakage_ = 0.0;
};

/// Dense operator on the modes of its layout. The hermitian/unitary flags are
/// set from a numerical check at construction.
class Operator {
public:
    Operator(ModeLayout layout, Matrix matrix, const Tolerances& tol = kTolerances)
        : layout_(std::move(layout)), matrix_(std::move(matrix)) {
        const auto n = static_cast<Eigen::Index>(layout_.dimension());
        if (matrix_.rows() != n || matrix_.cols() != n) {
            throw LayoutError("operator matrix size does not match layout " + layout_.describe());
        }
        hermitian_deviation_ = detail::max_abs(matrix_ - matrix_.adjoint());
        unitary_deviation_ = detail::max_abs(matrix_ * matrix_.adjoint() - Matrix::Identity(n, n));
        hermitian_ = hermitian_deviation_ < tol.hermitian;
        unitary_ = unitary_deviation_ < tol.unitary;
    }

    const ModeLayout& layout() const { return layout_; }
    const Matrix& matrix() const { return matrix_; }
    std::size_t dimension() const { return layout_.dimension(); }
    bool is_hermitian() const { return hermitian_; }
    bool is_unitary() const { return unitary_; }
    double hermitian_deviation() const { return hermitian_deviation_; }
    double unitary_deviation() const { return unitary_deviation_; }

    Operator adjoint() const { return Operator(layout_, matrix_.adjoint()); }

    friend Operator operator*(const Operator& lhs, const Operator& rhs) {
        if (!(lhs.layout_ == rhs.layout_)) throw LayoutError("operator product on different layouts");
        return Operator(lhs.layout_, lhs.matrix_ * rhs.matrix_);
    }
    friend Operator operator+(const Operator& lhs, const Operator& rhs) {
        if (!(lhs.layout_ == rhs.layout_)) throw LayoutError("operator sum on different layouts");
        return Operator(lhs.layout_, lhs.matrix_ + rhs.matrix_);
    }
    friend Operator operator*(cplx s, const Operator& op) { return Operator(op.layout_, s * op.matrix_); }

    Operator relabeled(Mode from, Mode to) const { return Operator(layout_.relabel(from, to), matrix_); }

private:
    ModeLayout layout_;
    Matrix matrix_;
    bool hermitian_ = false;
    bool unitary_ = false;
    double hermitian_deviation_ = 0.0;
    double unitary_deviation_ = 0.0;
};

struct DensityCheck {
    double trace_error;         ///< |Tr ρ − 1|
    double hermitian_deviation; ///< ‖ρ − ρ†‖_max
    double min_eigenvalue;

    bool ok(const Tolerances& tol = kTolerances) const {
        return trace_error <= tol.density_trace && hermitian_deviation <= tol.density_hermitian &&
               min_eigenvalue >= tol.density_min_eigenvalue;
    }
};

/// Density matrix over a layout. Not required to be normalized: unnormalized
/// conditional states (postselected slices) use the same type and `check()`
/// reports against the normalized invariants.
class DensityMatrix {
public:
    DensityMatrix(ModeLayout layout, Matrix rho) : layout_(std::move(layout)), rho_(std::move(rho)) {
        const auto n = static_cast<Eigen::Index>(layout_.dimension());
        if (rho_.rows() != n || rho_.cols() != n) {
            throw LayoutError("density matrix size does not match layout " + layout_.describe());
        }
    }

    static DensityMatrix pure(const StateVector& psi) {
        return DensityMatrix(psi.layout(), psi.amplitudes() * psi.amplitudes().adjoint());
    }

    const ModeLayout& layout() const { return layout_; }
    const Matrix& matrix() const { return rho_; }
    double trace() const { return rho_.trace().real(); }

    DensityMatrix normalized() const {
        const double t = trace();
        if (std::abs(t) < kTolerances.degenerate_probability) {
            throw DegenerateBranchError("cannot normalize a zero-trace density matrix", t);
        }
        return DensityMatrix(layout_, rho_ / t);
    }

    DensityMatrix relabeled(Mode from, Mode to) const { return DensityMatrix(layout_.relabel(from, to), rho_); }

    DensityMatrix partial_trace(std::span<const Mode> keep) const {
        const auto fi = detail::fiber_index(layout_, keep);
        const auto n = static_cast<Eigen::Index>(fi.inner.size());
        Matrix out = Matrix::Zero(n, n);
        for (std::size_t o : fi.outer) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const auto col = static_cast<Eigen::Index>(fi.inner[j] + o);
                for (Eigen::Index i = 0; i < n; ++i) {
                    out(i, j) += rho_(static_cast<Eigen::Index>(fi.inner[i] + o), col);
                }
            }
        }
        return DensityMatrix(layout_.select(keep), std::move(out));
    }
    DensityMatrix partial_trace(std::initializer_list<Mode> keep) const {
        return partial_trace(std::span<const Mode>(keep.begin(), keep.size()));
    }

    double min_eigenvalue() const {
        const Matrix h = 0.5 * (rho_ + rho_.adjoint());
        Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    DensityCheck check() const {
        return {std::abs(trace() - 1.0), detail::max_abs(rho_ - rho_.adjoint()), min_eigenvalue()};
    }

private:
    ModeLayout layout_;
    Matrix rho_;
};

// ---------------------------------------------------------------------------
// States

/// Truncated coherent state Σ_{n≤cutoff} e^{−|α|²/2} αⁿ/√n! |n⟩ (not renormalized).
inline StateVector coherent_state(Mode label, cplx alpha, int cutoff,
                                  double max_leakage = kTolerances.coherent_leakage) {
    if (cutoff < 0) throw DomainError("coherent_state: cutoff must be >= 0");
    Vector amp(cutoff + 1);
    amp(0) = std::exp(-std::norm(alpha) / 2.0);
    for (int n = 1; n <= cutoff; ++n) amp(n) = amp(n - 1) * alpha / std::sqrt(static_cast<double>(n));
    const double leakage = std::max(0.0, 1.0 - amp.squaredNorm());
    if (leakage > max_leakage) {
        throw TruncationError("coherent_state: cutoff " + std::to_string(cutoff) + " too small for |alpha|^2 = " +
                                  std::to_string(std::norm(alpha)),
                              leakage);
    }
    return StateVector(ModeLayout{{label, cutoff}}, std::move(amp), leakage);
}

inline StateVector fock_state(Mode label, int n, int cutoff) {
    if (n < 0 || n > cutoff) throw DomainError("fock_state: occupation outside cutoff");
    Vector amp = Vector::Zero(cutoff + 1);
    amp(n) = 1.0;
    return StateVector(ModeLayout{{label, cutoff}}, std::move(amp));
}

inline StateVector tensor(const StateVector& lhs, const StateVector& rhs) {
    const ModeLayout layout = lhs.layout().concat(rhs.layout());
    const auto nl = lhs.amplitudes().size();
    const auto nr = rhs.amplitudes().size();
    Vector amp(nl * nr);
    for (Eigen::Index i = 0; i < nl; ++i) amp.segment(i * nr, nr) = lhs.amplitudes()(i) * rhs.amplitudes();
    const double leakage = 1.0 - (1.0 - lhs.leakage()) * (1.0 - rhs.leakage());
    return StateVector(layout, std::move(amp), leakage);
}

inline StateVector tensor(std::span<const StateVector> states) {
    if (states.empty()) throw DomainError("tensor of an empty list");
    StateVector out = states.front();
    for (std::size_t i = 1; i < states.size(); ++i) out = tensor(out, states[i]);
    return out;
}

inline StateVector tensor(std::initializer_list<StateVector> states) {
    return tensor(std::span<const StateVector>(states.begin(), states.size()));
}

/// Reorders modes; `order` must be a permutation of the state's labels.
inline StateVector permuted(const StateVector& psi, std::span<const Mode> order) {
    if (order.size() != psi.layout().size()) throw LayoutError("permutation must list every mode");
    const auto fi = detail::fiber_index(psi.layout(), order);
    Vector amp(psi.amplitudes().size());
    for (std::size_t i = 0; i < fi.inner.size(); ++i) {
        amp(static_cast<Eigen::Index>(i)) = psi.amplitudes()(static_cast<Eigen::Index>(fi.inner[i]));
    }
    return StateVector(psi.layout().select(order), std::move(amp), psi.leakage());
}

// ---------------------------------------------------------------------------
// Single-mode operators

inline Operator annihilation(Mode label, int cutoff) {
    Matrix m = Matrix::Zero(cutoff + 1, cutoff + 1);
    for (int n = 1; n <= cutoff; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
    return Operator(ModeLayout{{label, cutoff}}, std::move(m));
}

inline Operator creation(Mode label, int cutoff) { return annihilation(label, cutoff).adjoint(); }

inline Operator number(Mode label, int cutoff) {
    Matrix m = Matrix::Zero(cutoff + 1, cutoff + 1);
    for (int n = 0; n <= cutoff; ++n) m(n, n) = static_cast<double>(n);
    return Operator(ModeLayout{{label, cutoff}}, std::move(m));
}

/// q = σ(c + c†).
inline Operator position(Mode label, int cutoff, double sigma = 1.0) {
    const Matrix c = annihilation(label, cutoff).matrix();
    return Operator(ModeLayout{{label, cutoff}}, sigma * (c + c.adjoint()));
}

/// p = i(c† − c)/(2σ), so that [q, p] = i away from the cutoff.
inline Operator momentum(Mode label, int cutoff, double sigma = 1.0) {
    const Matrix c = annihilation(label, cutoff).matrix();
    return Operator(ModeLayout{{label, cutoff}}, (kI / (2.0 * sigma)) * (c.adjoint() - c));
}

inline Operator identity(const ModeLayout& layout) {
    const auto n = static_cast<Eigen::Index>(layout.dimension());
    return Operator(layout, Matrix::Identity(n, n));
}

/// Operator on the concatenated layout (lhs modes first).
inline Operator kron(const Operator& lhs, const Operator& rhs) {
    const Matrix& a = lhs.matrix();
    const Matrix& b = rhs.matrix();
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return Operator(lhs.layout().concat(rhs.layout()), std::move(out));
}

/// exp(−i t H) for Hermitian H via eigendecomposition.
inline Matrix hermitian_exponential(const Matrix& h, double t) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const Eigen::VectorXcd phases = (-kI * t * es.eigenvalues().cast<cplx>().array()).exp().matrix();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// D(β) = exp(βc† − β*c), obtained from the eigendecomposition of the
/// Hermitian generator i(βc† − β*c). Exactly unitary on the truncated space.
inline Operator displacement(Mode label, cplx beta, int cutoff, Diagnostics* diag = nullptr) {
    const Matrix c = annihilation(label, cutoff).matrix();
    const Matrix gen = kI * (beta * c.adjoint() - std::conj(beta) * c);
    Operator d(ModeLayout{{label, cutoff}}, hermitian_exponential(gen, 1.0));
    if (!d.is_unitary()) {
        throw TruncationError("displacement: unitarity check failed", d.unitary_deviation());
    }
    const double tail = truncation_leakage(std::norm(beta), cutoff);
    if (tail > kTolerances.mirror_leakage) {
        warn(diag, "displacement: |beta|^2 = " + std::to_string(std::norm(beta)) + " not small against cutoff " +
                       std::to_string(cutoff) + " (coherent tail " + std::to_string(tail) + ")");
    }
    return d;
}

// ---------------------------------------------------------------------------
// Application

namespace detail {

inline void check_targets(const ModeLayout& full, const Operator& op, std::span<const Mode> targets) {
    if (targets.size() != op.layout().size()) throw LayoutError("target count does not match operator modes");
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (full.cutoff(targets[i]) != op.layout().modes()[i].cutoff) {
            throw LayoutError(std::string("cutoff mismatch on mode ") + to_char(targets[i]) + ": state " +
                              full.describe() + ", operator " + op.layout().describe());
        }
    }
}

/// Left-multiplies every column of `x` (vectors over `full`) by `op ⊗ I`.
inline Matrix apply_columns(const Matrix& op, const FiberIndex& fi, const Matrix& x) {
    const auto ni = static_cast<Eigen::Index>(fi.inner.size());
    const auto no = static_cast<Eigen::Index>(fi.outer.size());
    const Eigen::Index ncols = x.cols();
    Matrix gathered(ni, no * ncols);
    for (Eigen::Index col = 0; col < ncols; ++col) {
        for (Eigen::Index o = 0; o < no; ++o) {
            const std::size_t base = fi.outer[o];
            for (Eigen::Index i = 0; i < ni; ++i) {
                gathered(i, col * no + o) = x(static_cast<Eigen::Index>(base + fi.inner[i]), col);
            }
        }
    }
    const Matrix y = op * gathered;
    Matrix out(x.rows(), ncols);
    for (Eigen::Index col = 0; col < ncols; ++col) {
        for (Eigen::Index o = 0; o < no; ++o) {
            const std::size_t base = fi.outer[o];
            for (Eigen::Index i = 0; i < ni; ++i) {
                out(static_cast<Eigen::Index>(base + fi.inner[i]), col) = y(i, col * no + o);
            }
        }
    }
    return out;
}

}  // namespace detail

/// (op ⊗ I)|ψ⟩ with op acting on `targets` (in the operator's mode order).
inline StateVector apply(const Operator& op, std::span<const Mode> targets, const StateVector& psi) {
    detail::check_targets(psi.layout(), op, targets);
    const auto fi = detail::fiber_index(psi.layout(), targets);
    Matrix out = detail::apply_columns(op.matrix(), fi, psi.amplitudes());
    return StateVector(psi.layout(), out.col(0), psi.leakage());
}

/// Acts on the state modes carrying the operator's own labels.
inline StateVector apply(const Operator& op, const StateVector& psi) {
    const auto targets = op.layout().labels();
    return apply(op, targets, psi);
}

/// U ρ U† with U acting on its own labels.
inline DensityMatrix conjugate(const Operator& op, const DensityMatrix& rho) {
    const auto targets = op.layout().labels();
    detail::check_targets(rho.layout(), op, targets);
    const auto fi = detail::fiber_index(rho.layout(), targets);
    const Matrix left = detail::apply_columns(op.matrix(), fi, rho.matrix());
    const Matrix both = detail::apply_columns(op.matrix(), fi, left.adjoint()).adjoint();
    return DensityMatrix(rho.layout(), both);
}

inline DensityMatrix tensor(const DensityMatrix& lhs, const DensityMatrix& rhs) {
    const Matrix& a = lhs.matrix();
    const Matrix& b = rhs.matrix();
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return DensityMatrix(lhs.layout().concat(rhs.layout()), std::move(out));
}

inline DensityMatrix permuted(const DensityMatrix& rho, std::span<const Mode> order) {
    if (order.size() != rho.layout().size()) throw LayoutError("permutation must list every mode");
    const auto fi = detail::fiber_index(rho.layout(), order);
    const auto n = static_cast<Eigen::Index>(fi.inner.size());
    Matrix out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, j) = rho.matrix()(static_cast<Eigen::Index>(fi.inner[i]), static_cast<Eigen::Index>(fi.inner[j]));
        }
    }
    return DensityMatrix(rho.layout().select(order), std::move(out));
}

// ---------------------------------------------------------------------------
// Projection

/// ⟨n|_mode ψ⟩ over the remaining modes, not renormalized.
inline StateVector slice_fock(const StateVector& psi, Mode label, int n) {
    const ModeLayout& layout = psi.layout();
    if (n < 0 || n > layout.cutoff(label)) throw DomainError("slice_fock: occupation outside cutoff");
    const ModeLayout rest = layout.without(label);
    const auto labels = rest.labels();
    const auto fi = detail::fiber_index(layout, labels);
    const std::size_t base = static_cast<std::size_t>(n) * layout.stride(label);
    Vector amp(static_cast<Eigen::Index>(fi.inner.size()));
    for (std::size_t i = 0; i < fi.inner.size(); ++i) {
        amp(static_cast<Eigen::Index>(i)) = psi.amplitudes()(static_cast<Eigen::Index>(base + fi.inner[i]));
    }
    return StateVector(rest, std::move(amp), psi.leakage());
}

struct Projection {
    StateVector conditional;  ///< renormalized state of the remaining modes
    double probability;       ///< squared norm of the slice
};

inline Projection project_fock(const StateVector& psi, Mode label, int n, const Tolerances& tol = kTolerances) {
    StateVector slice = slice_fock(psi, label, n);
    const double p = slice.squared_norm();
    if (p < tol.degenerate_probability) {
        throw DegenerateBranchError(std::string("project_fock: branch |") + std::to_string(n) + "> of mode " +
                                        to_char(label) + " has zero probability",
                                    p);
    }
    return {StateVector(slice.layout(), slice.amplitudes() / std::sqrt(p), slice.leakage()), p};
}

/// ⟨n|ρ|n⟩ on one mode, not renormalized.
inline DensityMatrix slice_fock(const DensityMatrix& rho, Mode label, int n) {
    const ModeLayout& layout = rho.layout();
    if (n < 0 || n > layout.cutoff(label)) throw DomainError("slice_fock: occupation outside cutoff");
    const ModeLayout rest = layout.without(label);
    const auto labels = rest.labels();
    const auto fi = detail::fiber_index(layout, labels);
    const std::size_t base = static_cast<std::size_t>(n) * layout.stride(label);
    const auto dim = static_cast<Eigen::Index>(fi.inner.size());
    Matrix out(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            out(i, j) = rho.matrix()(static_cast<Eigen::Index>(base + fi.inner[i]),
                                     static_cast<Eigen::Index>(base + fi.inner[j]));
        }
    }
    return DensityMatrix(rest, std::move(out));
}

struct DensityProjection {
    DensityMatrix conditional;
    double probability;
};

inline DensityProjection project_fock(const DensityMatrix& rho, Mode label, int n,
                                      const Tolerances& tol = kTolerances) {
    DensityMatrix slice = slice_fock(rho, label, n);
    const double p = slice.trace();
    if (p < tol.degenerate_probability) {
        throw DegenerateBranchError(std::string("project_fock: branch |") + std::to_string(n) + "> of mode " +
                                        to_char(label) + " has zero probability",
                                    p);
    }
    return {DensityMatrix(slice.layout(), slice.matrix() / p), p};
}

// ---------------------------------------------------------------------------
// Expectations

namespace detail {

inline void check_hermitian_value(const Operator& op, cplx value, double scale, const Tolerances& tol) {
    if (op.is_hermitian() && std::abs(value.imag()) > tol.expectation_imag * std::max(1.0, scale)) {
        throw ToleranceError("expectation of a Hermitian operator has imaginary part " +
                             std::to_string(value.imag()));
    }
}

}  // namespace detail

/// ⟨ψ|op ⊗ I|ψ⟩ (no division by ⟨ψ|ψ⟩).
inline cplx expectation(const StateVector& psi, const Operator& op, const Tolerances& tol = kTolerances) {
    const StateVector moved = apply(op, psi);
    const cplx value = psi.amplitudes().dot(moved.amplitudes());
    detail::check_hermitian_value(op, value, std::abs(value), tol);
    return value;
}

/// Tr(ρ (op ⊗ I)) (no division by Tr ρ).
inline cplx expectation(const DensityMatrix& rho, const Operator& op, const Tolerances& tol = kTolerances) {
    const auto targets = op.layout().labels();
    detail::check_targets(rho.layout(), op, targets);
    const auto fi = detail::fiber_index(rho.layout(), targets);
    const Matrix& m = op.matrix();
    const auto n = static_cast<Eigen::Index>(fi.inner.size());
    cplx value = 0.0;
    for (std::size_t o : fi.outer) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                value += m(i, j) * rho.matrix()(static_cast<Eigen::Index>(fi.inner[j] + o),
                                                static_cast<Eigen::Index>(fi.inner[i] + o));
            }
        }
    }
    detail::check_hermitian_value(op, value, std::abs(value), tol);
    return value;
}

/// Postselected pointer displacement Tr(ρ_f M)/Tr(ρ_f) − Tr(ρ_i M).
inline double pointer_shift(const DensityMatrix& rho_f, const DensityMatrix& rho_i, const Operator& observable,
                            const Tolerances& tol = kTolerances) {
    if (!observable.is_hermitian()) throw DomainError("pointer_shift requires a Hermitian observable");
    const double tf = rho_f.trace();
    if (std::abs(tf) < tol.degenerate_probability) {
        throw DegenerateBranchError("pointer_shift: postselected state has zero trace", tf);
    }
    return expectation(rho_f, observable, tol).real() / tf - expectation(rho_i, observable, tol).real();
}

/// ⟨ψ|ρ|ψ⟩ for normalized ψ and ρ on the same layout.
inline double fidelity(const DensityMatrix& rho, const StateVector& psi) {
    if (!(rho.layout() == psi.layout())) throw LayoutError("fidelity: layout mismatch");
    return psi.amplitudes().dot(rho.matrix() * psi.amplitudes()).real();
}

inline double trace_distance(const DensityMatrix& lhs, const DensityMatrix& rhs) {
    if (!(lhs.layout() == rhs.layout())) throw LayoutError("trace_distance: layout mismatch");
    const Matrix diff = lhs.matrix() - rhs.matrix();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace optoweak
