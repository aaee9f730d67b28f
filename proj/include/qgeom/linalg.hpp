#pragma once

// Small dense complex linear algebra: Hermitian operators, pure states,
// expectations, (anti)commutators and the Hermitian exponential map.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace qgeom {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr Complex kI{0.0, 1.0};

/// Relative off-diagonal Frobenius mass at which the Jacobi sweeps stop.
inline constexpr double kJacobiThreshold = 1e-13;
/// Sweep cap is kJacobiSweepFactor * dim^2.
inline constexpr long kJacobiSweepFactor = 100;

namespace detail {

inline void require_square(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw UsageError("operator must be square, got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
    }
    if (m.rows() < 2) {
        throw UsageError("operator dimension must be at least 2");
    }
    if (!m.allFinite()) {
        throw NumericError("operator has non-finite entries");
    }
}

inline void require_same_dim(Index a, Index b, const char* what) {
    if (a != b) {
        throw UsageError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
    }
}

} // namespace detail

/// General (possibly non-Hermitian) square operator.
class SquareOperator {
public:
    explicit SquareOperator(Matrix entries) : m_(std::move(entries)) { detail::require_square(m_); }

    static SquareOperator identity(Index dim) { return SquareOperator(Matrix::Identity(dim, dim)); }
    static SquareOperator zero(Index dim) { return SquareOperator(Matrix::Zero(dim, dim)); }

    [[nodiscard]] Index dim() const noexcept { return m_.rows(); }
    [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }
    [[nodiscard]] Complex operator()(Index row, Index col) const { return m_(row, col); }

    [[nodiscard]] SquareOperator adjoint() const { return SquareOperator(m_.adjoint()); }

    /// max |A_jk - conj(A_kj)|
    [[nodiscard]] double hermitian_defect() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }
    /// max |A_jk + conj(A_kj)|
    [[nodiscard]] double anti_hermitian_defect() const { return (m_ + m_.adjoint()).cwiseAbs().maxCoeff(); }

    [[nodiscard]] double max_abs_diff(const SquareOperator& other) const {
        detail::require_same_dim(dim(), other.dim(), "max_abs_diff");
        return (m_ - other.m_).cwiseAbs().maxCoeff();
    }

    friend SquareOperator operator+(const SquareOperator& a, const SquareOperator& b) {
        detail::require_same_dim(a.dim(), b.dim(), "operator+");
        return SquareOperator(a.m_ + b.m_);
    }
    friend SquareOperator operator-(const SquareOperator& a, const SquareOperator& b) {
        detail::require_same_dim(a.dim(), b.dim(), "operator-");
        return SquareOperator(a.m_ - b.m_);
    }
    friend SquareOperator operator*(const SquareOperator& a, const SquareOperator& b) {
        detail::require_same_dim(a.dim(), b.dim(), "operator*");
        return SquareOperator(a.m_ * b.m_);
    }
    friend SquareOperator operator*(Complex s, const SquareOperator& a) { return SquareOperator(s * a.m_); }

private:
    Matrix m_;
};

/// Hermitian operator. Construction symmetrizes, so the stored matrix is
/// exactly equal to its adjoint.
class HermitianOperator {
public:
    explicit HermitianOperator(const Matrix& entries) : m_(symmetrize(entries)) {}
    explicit HermitianOperator(const SquareOperator& op) : m_(symmetrize(op.matrix())) {}

    static HermitianOperator identity(Index dim) { return HermitianOperator(Matrix::Identity(dim, dim)); }
    static HermitianOperator zero(Index dim) { return HermitianOperator(Matrix::Zero(dim, dim)); }

    /// Largest |A_jk - conj(A_kj)| of an arbitrary matrix.
    static double skew(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

    [[nodiscard]] Index dim() const noexcept { return m_.rows(); }
    [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }
    [[nodiscard]] Complex operator()(Index row, Index col) const { return m_(row, col); }
    [[nodiscard]] SquareOperator as_square() const { return SquareOperator(m_); }

    [[nodiscard]] HermitianOperator squared() const { return HermitianOperator(m_ * m_); }

    [[nodiscard]] double max_abs_diff(const HermitianOperator& other) const {
        detail::require_same_dim(dim(), other.dim(), "max_abs_diff");
        return (m_ - other.m_).cwiseAbs().maxCoeff();
    }

    /// Infinity norm (max absolute row sum); an upper bound on the spectral norm.
    [[nodiscard]] double inf_norm() const { return m_.cwiseAbs().rowwise().sum().maxCoeff(); }

    friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
        detail::require_same_dim(a.dim(), b.dim(), "operator+");
        return HermitianOperator(a.m_ + b.m_);
    }
    friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b) {
        detail::require_same_dim(a.dim(), b.dim(), "operator-");
        return HermitianOperator(a.m_ - b.m_);
    }
    friend HermitianOperator operator*(double s, const HermitianOperator& a) { return HermitianOperator(s * a.m_); }
    friend SquareOperator operator*(const HermitianOperator& a, const HermitianOperator& b) {
        detail::require_same_dim(a.dim(), b.dim(), "operator*");
        return SquareOperator(a.m_ * b.m_);
    }

private:
    static Matrix symmetrize(const Matrix& m) {
        detail::require_square(m);
        Matrix out = 0.5 * (m + m.adjoint());
        for (Index k = 0; k < out.rows(); ++k) {
            out(k, k) = Complex(out(k, k).real(), 0.0);
        }
        return out;
    }

    Matrix m_;
};

/// Unit-norm state vector; construction renormalizes.
class PureState {
public:
    explicit PureState(Vector amplitudes) : v_(std::move(amplitudes)) {
        if (v_.size() < 2) {
            throw UsageError("state dimension must be at least 2");
        }
        if (!v_.allFinite()) {
            throw NumericError("state has non-finite amplitudes");
        }
        const double n = v_.norm();
        if (!(n > 0.0)) {
            throw UsageError("cannot normalize the zero vector");
        }
        v_ /= n;
    }

    static PureState basis(Index dim, Index k) {
        Vector v = Vector::Zero(dim);
        v(k) = 1.0;
        return PureState(std::move(v));
    }

    [[nodiscard]] Index dim() const noexcept { return v_.size(); }
    [[nodiscard]] const Vector& amplitudes() const noexcept { return v_; }
    [[nodiscard]] Complex operator[](Index k) const { return v_(k); }

    /// |<this|other>|
    [[nodiscard]] double overlap(const PureState& other) const {
        detail::require_same_dim(dim(), other.dim(), "overlap");
        return std::abs(v_.dot(other.v_));
    }

private:
    Vector v_;
};

// ---------------------------------------------------------------------------
// Pauli matrices

inline HermitianOperator pauli_x() {
    Matrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return HermitianOperator(m);
}

inline HermitianOperator pauli_y() {
    Matrix m(2, 2);
    m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
    return HermitianOperator(m);
}

inline HermitianOperator pauli_z() {
    Matrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return HermitianOperator(m);
}

/// m . sigma for a real 3-vector m.
inline HermitianOperator pauli_dot(const Eigen::Vector3d& m) {
    Matrix h(2, 2);
    h << Complex(m.z(), 0), Complex(m.x(), -m.y()), Complex(m.x(), m.y()), Complex(-m.z(), 0);
    return HermitianOperator(h);
}

// ---------------------------------------------------------------------------
// Expectations

/// <psi|A|psi> for a general operator.
inline Complex expectation_complex(const SquareOperator& a, const PureState& psi) {
    detail::require_same_dim(a.dim(), psi.dim(), "expectation");
    return psi.amplitudes().dot(a.matrix() * psi.amplitudes());
}

/// <psi|A|psi>; the imaginary rounding residue is checked and discarded.
inline double expectation(const HermitianOperator& a, const PureState& psi) {
    detail::require_same_dim(a.dim(), psi.dim(), "expectation");
    const Complex raw = psi.amplitudes().dot(a.matrix() * psi.amplitudes());
    const double scale = std::max(1.0, a.matrix().cwiseAbs().maxCoeff() * static_cast<double>(a.dim()));
    if (std::abs(raw.imag()) >= 1e-10 * scale) {
        throw NumericError("expectation of Hermitian operator has imaginary residue " +
                           std::to_string(raw.imag()));
    }
    return raw.real();
}

/// A - <A> I
inline HermitianOperator centered(const HermitianOperator& a, const PureState& psi) {
    const double mean = expectation(a, psi);
    Matrix m = a.matrix();
    m.diagonal().array() -= mean;
    return HermitianOperator(m);
}

/// <A^2> - <A>^2, evaluated as ||(A - <A>)psi||^2 so it cannot go negative
/// through cancellation.
inline double variance(const HermitianOperator& a, const PureState& psi) {
    const HermitianOperator da = centered(a, psi);
    return (da.matrix() * psi.amplitudes()).squaredNorm();
}

inline double standard_deviation(const HermitianOperator& a, const PureState& psi) {
    return std::sqrt(variance(a, psi));
}

inline SquareOperator commutator(const SquareOperator& a, const SquareOperator& b) {
    detail::require_same_dim(a.dim(), b.dim(), "commutator");
    return SquareOperator(a.matrix() * b.matrix() - b.matrix() * a.matrix());
}

inline SquareOperator commutator(const HermitianOperator& a, const HermitianOperator& b) {
    return commutator(a.as_square(), b.as_square());
}

inline SquareOperator anticommutator(const SquareOperator& a, const SquareOperator& b) {
    detail::require_same_dim(a.dim(), b.dim(), "anticommutator");
    return SquareOperator(a.matrix() * b.matrix() + b.matrix() * a.matrix());
}

/// {A, B} of Hermitian operators is Hermitian.
inline HermitianOperator anticommutator(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(anticommutator(a.as_square(), b.as_square()));
}

/// A|psi> without renormalization.
inline Vector apply(const SquareOperator& a, const PureState& psi) {
    detail::require_same_dim(a.dim(), psi.dim(), "apply");
    return a.matrix() * psi.amplitudes();
}

// ---------------------------------------------------------------------------
// Hermitian eigensolver (cyclic complex Jacobi)

struct EigenDecomposition {
    Eigen::VectorXd values;  // ascending
    Matrix vectors;          // columns are eigenvectors
    long sweeps = 0;
};

inline EigenDecomposition hermitian_eigen(const HermitianOperator& h) {
    const Index n = h.dim();
    Matrix a = h.matrix();
    Matrix v = Matrix::Identity(n, n);

    const double threshold = kJacobiThreshold * a.norm();
    const long max_sweeps = kJacobiSweepFactor * static_cast<long>(n * n);

    auto off_mass = [&] {
        double s = 0.0;
        for (Index p = 0; p < n; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                s += 2.0 * std::norm(a(p, q));
            }
        }
        return std::sqrt(s);
    };

    long sweep = 0;
    bool converged = false;
    for (; sweep <= max_sweeps; ++sweep) {
        if (off_mass() <= threshold) {
            converged = true;
            break;
        }
        if (sweep == max_sweeps) {
            break;
        }
        for (Index p = 0; p < n; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double mag = std::sqrt(std::norm(apq));
                if (mag == 0.0) {
                    continue;
                }
                // e^{-i phi} with apq = |apq| e^{i phi}
                const double er = apq.real() / mag;
                const double ei = -apq.imag() / mag;
                const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
                const double t = std::abs(theta) > 1e150
                                     ? 0.5 / theta
                                     : std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                // G restricted to (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                // x * e^{-i phi} and x * e^{+i phi} written out in real arithmetic
                auto rot = [er, ei](const Complex& x) {
                    return Complex(x.real() * er - x.imag() * ei, x.real() * ei + x.imag() * er);
                };
                auto rot_conj = [er, ei](const Complex& x) {
                    return Complex(x.real() * er + x.imag() * ei, x.imag() * er - x.real() * ei);
                };

                for (Index k = 0; k < n; ++k) {
                    const Complex akp = a(k, p);
                    const Complex akq = rot(a(k, q));
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Index k = 0; k < n; ++k) {
                    const Complex apk = a(p, k);
                    const Complex aqk = rot_conj(a(q, k));
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();

                for (Index k = 0; k < n; ++k) {
                    const Complex vkp = v(k, p);
                    const Complex vkq = rot(v(k, q));
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (!converged) {
        throw NumericError("Jacobi eigensolver did not converge after " + std::to_string(max_sweeps) + " sweeps");
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i).real() < a(j, j).real(); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    out.sweeps = sweep;
    for (Index k = 0; k < n; ++k) {
        const auto src = order[static_cast<std::size_t>(k)];
        out.values(k) = a(src, src).real();
        out.vectors.col(k) = v.col(src);
    }
    return out;
}

/// exp(-i H tau / hbar) via eigendecomposition of H.
inline SquareOperator unitary_of(const HermitianOperator& h, double tau, double hbar = 1.0) {
    if (!std::isfinite(tau)) {
        throw UsageError("unitary_of: tau must be finite");
    }
    if (!(hbar > 0.0)) {
        throw UsageError("unitary_of: hbar must be positive");
    }
    if (tau == 0.0) {
        return SquareOperator::identity(h.dim());
    }
    const EigenDecomposition eig = hermitian_eigen(h);
    Vector phases(h.dim());
    for (Index k = 0; k < h.dim(); ++k) {
        phases(k) = std::exp(-kI * eig.values(k) * tau / hbar);
    }
    return SquareOperator(eig.vectors * phases.asDiagonal() * eig.vectors.adjoint());
}

// ---------------------------------------------------------------------------
// Seeded ensembles

/// Caller-owned random source. Identical seeds give identical streams.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    /// Standard complex Gaussian: E|z|^2 = 1.
    Complex complex_normal() {
        const double re = normal();
        const double im = normal();
        constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
        return {re * inv_sqrt2, im * inv_sqrt2};
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// scale * (M + M^dagger)/2 with i.i.d. standard complex Gaussian M.
inline HermitianOperator random_hermitian(Index dim, double scale, SeededRng& rng) {
    if (dim < 2) {
        throw UsageError("random_hermitian: dim must be at least 2");
    }
    if (!(scale > 0.0)) {
        throw UsageError("random_hermitian: scale must be positive");
    }
    Matrix m(dim, dim);
    for (Index r = 0; r < dim; ++r) {
        for (Index c = 0; c < dim; ++c) {
            m(r, c) = rng.complex_normal();
        }
    }
    return HermitianOperator(scale * 0.5 * (m + m.adjoint()));
}

/// Haar-uniform pure state.
inline PureState random_state(Index dim, SeededRng& rng) {
    if (dim < 2) {
        throw UsageError("random_state: dim must be at least 2");
    }
    for (;;) {
        Vector v(dim);
        for (Index k = 0; k < dim; ++k) {
            v(k) = rng.complex_normal();
        }
        if (v.norm() > 0.0) {
            return PureState(std::move(v));
        }
    }
}

} // namespace qgeom
