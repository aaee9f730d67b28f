#pragma once

// Spin-1/2 specialization: H(t) = h0(t) I + m(t).sigma, rho = (I + a.sigma)/2, hbar = 1.
// The Bloch path integrates da/dt = 2 m x a with classical RK4 and never
// touches the eigensolver, so it is an independent check on the operator path.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "linalg.hpp"
#include "propagator.hpp"
#include "schedule.hpp"

namespace qgeom {

using Vec3 = Eigen::Vector3d;

class BlochVector {
public:
    /// Normalizes; the zero vector is rejected.
    explicit BlochVector(const Vec3& v) {
        if (!v.allFinite() || !(v.norm() > 0.0)) {
            throw UsageError("Bloch vector must be finite and nonzero");
        }
        v_ = v / v.norm();
    }
    BlochVector(double x, double y, double z) : BlochVector(Vec3(x, y, z)) {}

    [[nodiscard]] const Vec3& vec() const noexcept { return v_; }
    [[nodiscard]] double x() const noexcept { return v_.x(); }
    [[nodiscard]] double y() const noexcept { return v_.y(); }
    [[nodiscard]] double z() const noexcept { return v_.z(); }

private:
    Vec3 v_;
};

/// <sigma_x>, <sigma_y>, <sigma_z>
inline BlochVector bloch_from_state(const PureState& psi) {
    if (psi.dim() != 2) {
        throw UsageError("bloch_from_state requires a qubit state");
    }
    return BlochVector(expectation(pauli_x(), psi), expectation(pauli_y(), psi), expectation(pauli_z(), psi));
}

/// (cos(theta/2), e^{i phi} sin(theta/2))
inline PureState state_from_bloch(const BlochVector& a) {
    const double theta = std::acos(std::clamp(a.z(), -1.0, 1.0));
    const double phi = std::atan2(a.y(), a.x());
    Vector v(2);
    v << std::cos(0.5 * theta), std::polar(std::sin(0.5 * theta), phi);
    return PureState(std::move(v));
}

/// Splits a 2x2 Hermitian operator into h0 I + m.sigma.
struct PauliComponents {
    double h0;
    Vec3 m;
};

inline PauliComponents pauli_components(const HermitianOperator& h) {
    if (h.dim() != 2) {
        throw UsageError("pauli_components requires a 2x2 operator");
    }
    const Matrix& a = h.matrix();
    return {0.5 * (a(0, 0).real() + a(1, 1).real()),
            Vec3(a(1, 0).real(), a(1, 0).imag(), 0.5 * (a(0, 0).real() - a(1, 1).real()))};
}

// ---------------------------------------------------------------------------
// Magnetic schedules

enum class MagneticFamily { fixed_axis, rotating_field, custom_fourier };

struct FieldFourierTerm {
    Vec3 b;
    Vec3 c;
    double b0 = 0.0;  // identity parts
    double c0 = 0.0;
    double omega = 0.0;
};

/// m(t) = m_a + sum_k [b_k cos(w_k t) + c_k sin(w_k t)], with a scalar identity part alongside.
struct CustomFourierField {
    Vec3 a;
    double a0 = 0.0;
    std::vector<FieldFourierTerm> terms;
};

class MagneticSchedule {
public:
    static MagneticSchedule fixed_axis(const Vec3& m0, double alpha) {
        if (!(m0.norm() > 0.0)) {
            throw UsageError("fixed_axis needs a nonzero m0");
        }
        return MagneticSchedule(FixedAxisParams{m0, alpha});
    }
    static MagneticSchedule rotating_field(double m0, double omega) {
        return MagneticSchedule(RotatingFieldParams{m0, omega});
    }
    static MagneticSchedule custom_fourier(CustomFourierField field) { return MagneticSchedule(std::move(field)); }

    /// Bloch-side view of a qubit HamiltonianSchedule (hbar must be 1).
    static MagneticSchedule from_schedule(const HamiltonianSchedule& sched) {
        if (sched.dim() != 2) {
            throw UsageError("magnetic schedules describe qubits only");
        }
        if (sched.hbar() != 1.0) {
            throw UsageError("the qubit module works in hbar = 1 units");
        }
        return std::visit(
            [](const auto& p) -> MagneticSchedule {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, FixedAxisParams>) {
                    return fixed_axis(p.m0, p.alpha);
                } else if constexpr (std::is_same_v<P, RotatingFieldParams>) {
                    return rotating_field(p.m0, p.omega);
                } else if constexpr (std::is_same_v<P, ConstantParams>) {
                    const auto pc = pauli_components(p.a);
                    return custom_fourier(CustomFourierField{pc.m, pc.h0, {}});
                } else if constexpr (std::is_same_v<P, FourierParams>) {
                    const auto pa = pauli_components(p.a);
                    CustomFourierField f{pa.m, pa.h0, {}};
                    for (const auto& term : p.terms) {
                        const auto pb = pauli_components(term.b);
                        const auto pc = pauli_components(term.c);
                        f.terms.push_back(FieldFourierTerm{pb.m, pc.m, pb.h0, pc.h0, term.omega});
                    }
                    return custom_fourier(std::move(f));
                } else {
                    throw UsageError("piecewise_linear schedules have no magnetic-field counterpart");
                }
            },
            sched.params());
    }

    [[nodiscard]] MagneticFamily family() const {
        switch (params_.index()) {
        case 0: return MagneticFamily::fixed_axis;
        case 1: return MagneticFamily::rotating_field;
        default: return MagneticFamily::custom_fourier;
        }
    }

    [[nodiscard]] Vec3 m(double t) const {
        return std::visit(
            [t](const auto& p) -> Vec3 {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, FixedAxisParams>) {
                    const double n = p.m0.norm();
                    return (n + p.alpha * t) / n * p.m0;
                } else if constexpr (std::is_same_v<P, RotatingFieldParams>) {
                    return {p.m0 * std::cos(p.omega * t), p.m0 * std::sin(p.omega * t), 0.0};
                } else {
                    Vec3 out = p.a;
                    for (const auto& term : p.terms) {
                        out += std::cos(term.omega * t) * term.b + std::sin(term.omega * t) * term.c;
                    }
                    return out;
                }
            },
            params_);
    }

    [[nodiscard]] Vec3 mdot(double t) const {
        return std::visit(
            [t](const auto& p) -> Vec3 {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, FixedAxisParams>) {
                    return p.alpha / p.m0.norm() * p.m0;
                } else if constexpr (std::is_same_v<P, RotatingFieldParams>) {
                    return {-p.m0 * p.omega * std::sin(p.omega * t), p.m0 * p.omega * std::cos(p.omega * t), 0.0};
                } else {
                    Vec3 out = Vec3::Zero();
                    for (const auto& term : p.terms) {
                        out += term.omega * (-std::sin(term.omega * t) * term.b + std::cos(term.omega * t) * term.c);
                    }
                    return out;
                }
            },
            params_);
    }

    /// Identity coefficient h0(t) of H; zero for the pure field families.
    [[nodiscard]] double offset(double t) const {
        const auto* p = std::get_if<CustomFourierField>(&params_);
        if (!p) {
            return 0.0;
        }
        double out = p->a0;
        for (const auto& term : p->terms) {
            out += std::cos(term.omega * t) * term.b0 + std::sin(term.omega * t) * term.c0;
        }
        return out;
    }

    [[nodiscard]] double offset_rate(double t) const {
        const auto* p = std::get_if<CustomFourierField>(&params_);
        if (!p) {
            return 0.0;
        }
        double out = 0.0;
        for (const auto& term : p->terms) {
            out += term.omega * (-std::sin(term.omega * t) * term.b0 + std::cos(term.omega * t) * term.c0);
        }
        return out;
    }

    [[nodiscard]] HermitianOperator H(double t) const {
        Matrix h = pauli_dot(m(t)).matrix();
        h.diagonal().array() += offset(t);
        return HermitianOperator(h);
    }

    [[nodiscard]] HermitianOperator Hdot(double t) const {
        Matrix h = pauli_dot(mdot(t)).matrix();
        h.diagonal().array() += offset_rate(t);
        return HermitianOperator(h);
    }

private:
    using Params = std::variant<FixedAxisParams, RotatingFieldParams, CustomFourierField>;
    explicit MagneticSchedule(Params p) : params_(std::move(p)) {}

    Params params_;
};

// ---------------------------------------------------------------------------
// Bloch dynamics

/// da/dt = 2 m x a
inline Vec3 bloch_rhs(const Vec3& a, const Vec3& m) { return 2.0 * m.cross(a); }

struct BlochTrajectory {
    TimeGrid grid;
    std::vector<BlochVector> points;
    /// Largest | ||a|| - 1 | after an RK4 step, before renormalization.
    double max_norm_drift = 0.0;
};

inline BlochTrajectory integrate_bloch(const MagneticSchedule& field, const BlochVector& a0, const TimeGrid& grid) {
    BlochTrajectory out{grid, {}, 0.0};
    out.points.reserve(static_cast<std::size_t>(grid.steps()));
    out.points.push_back(a0);
    const double dt = grid.dt();
    for (long i = 0; i + 1 < grid.steps(); ++i) {
        const double t = grid.at(i);
        const Vec3& a = out.points.back().vec();
        const Vec3 m0 = field.m(t);
        const Vec3 mh = field.m(t + 0.5 * dt);
        const Vec3 m1 = field.m(t + dt);
        const Vec3 k1 = bloch_rhs(a, m0);
        const Vec3 k2 = bloch_rhs(a + 0.5 * dt * k1, mh);
        const Vec3 k3 = bloch_rhs(a + 0.5 * dt * k2, mh);
        const Vec3 k4 = bloch_rhs(a + dt * k3, m1);
        const Vec3 next = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.max_norm_drift = std::max(out.max_norm_drift, std::abs(next.norm() - 1.0));
        out.points.emplace_back(next);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form kinematics

/// sqrt(m^2 - (a.m)^2)
inline double vH_closed(const BlochVector& a, const Vec3& m) {
    const double am = a.vec().dot(m);
    return std::sqrt(std::max(0.0, m.squaredNorm() - am * am));
}

/// [m.mdot - (a.m)(a.mdot)] / v_H
inline double aH_closed(const BlochVector& a, const Vec3& m, const Vec3& mdot) {
    const double v = vH_closed(a, m);
    if (v < kDegeneracyThreshold) {
        throw DegenerateStateError("a is parallel to m: v_H = " + std::to_string(v));
    }
    return (m.dot(mdot) - a.vec().dot(m) * a.vec().dot(mdot)) / v;
}

/// sqrt(mdot^2 - (a.mdot)^2)
inline double sigma_Hdot_closed(const BlochVector& a, const Vec3& mdot) {
    const double am = a.vec().dot(mdot);
    return std::sqrt(std::max(0.0, mdot.squaredNorm() - am * am));
}

/// <Hdot> = a . mdot (field part only)
inline double energy_loss_rate(const BlochVector& a, const Vec3& mdot) { return a.vec().dot(mdot); }

/// 4 (a.m)^2 / (m^2 - (a.m)^2)
inline double kappa_LT_closed(const BlochVector& a, const Vec3& m) {
    const double v = vH_closed(a, m);
    if (v < kDegeneracyThreshold) {
        throw DegenerateStateError("a is parallel to m");
    }
    const double am = a.vec().dot(m);
    return 4.0 * am * am / (v * v);
}

struct QubitBoundReport {
    double lhs;           // a_H^2 (0 when degenerate)
    double rhs;           // mdot^2 - (a.mdot)^2
    double lagrange_lhs;  // |m x mdot|^2
    double lagrange_rhs;  // |m x mdot|^2 - [a.(m x mdot)]^2
    double triple;        // a.(m x mdot)
};

inline QubitBoundReport qubit_bound_report(const BlochVector& a, const Vec3& m, const Vec3& mdot) {
    const double v = vH_closed(a, m);
    const double ah = v < kDegeneracyThreshold ? 0.0 : aH_closed(a, m, mdot);
    const double amd = a.vec().dot(mdot);
    const Vec3 cross = m.cross(mdot);
    const double triple = a.vec().dot(cross);
    return {ah * ah, mdot.squaredNorm() - amd * amd, cross.squaredNorm(), cross.squaredNorm() - triple * triple, triple};
}

// ---------------------------------------------------------------------------
// Bloch-path samples and dual-path comparison

struct BlochRecord {
    double t;
    Vec3 a;
    Vec3 m;
    Vec3 mdot;
    double triple;
    GeometrySample geometry;
};

/// Geometry columns from closed forms along the Bloch path. The nonstationary
/// curvature reuses the operator formula on the 2x2 operators built from (a, m, mdot).
inline std::vector<BlochRecord> bloch_records(const MagneticSchedule& field, const BlochTrajectory& path) {
    const long n = path.grid.steps();
    std::vector<BlochRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double t = path.grid.at(i);
        const BlochVector& a = path.points[static_cast<std::size_t>(i)];
        const Vec3 m = field.m(t);
        const Vec3 md = field.mdot(t);
        const QubitBoundReport rep = qubit_bound_report(a, m, md);

        GeometrySample g;
        g.t = t;
        g.exp_H = field.offset(t) + a.vec().dot(m);
        g.sigma_H = vH_closed(a, m);
        g.v_H = g.sigma_H;
        g.sigma_Hdot = sigma_Hdot_closed(a, md);
        g.main_slack = rep.rhs - rep.lhs;
        g.degenerate = g.v_H < kDegeneracyThreshold;
        if (!g.degenerate) {
            g.a_H_analytic = aH_closed(a, m, md);
            g.kappa_LT_sq = kappa_LT_closed(a, m);
            g.kappa_AC_sq = curvature_AC(pauli_dot(m), pauli_dot(md), state_from_bloch(a));
        }
        out.push_back(BlochRecord{t, a.vec(), m, md, rep.triple, g});
    }
    const double dt = path.grid.dt();
    for (long i = 1; i + 1 < n; ++i) {
        auto& g = out[static_cast<std::size_t>(i)].geometry;
        if (!g.degenerate) {
            g.a_H_fd = (out[static_cast<std::size_t>(i + 1)].geometry.v_H - out[static_cast<std::size_t>(i - 1)].geometry.v_H) /
                       (2.0 * dt);
        }
    }
    std::vector<GeometrySample> geo;
    geo.reserve(out.size());
    for (const auto& r : out) {
        geo.push_back(r.geometry);
    }
    const auto s = arc_length(geo);
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].geometry.s_arc = s[k];
    }
    return out;
}

inline constexpr const char* kQubitCsvExtraColumns = "ax,ay,az,mx,my,mz,triple";

inline void write_qubit_csv(std::ostream& out, const std::vector<BlochRecord>& records) {
    out << kGeometryCsvHeader << ',' << kQubitCsvExtraColumns << '\n';
    for (const auto& r : records) {
        out << geometry_csv_row(r.geometry) << ',' << format_real(r.a.x()) << ',' << format_real(r.a.y()) << ','
            << format_real(r.a.z()) << ',' << format_real(r.m.x()) << ',' << format_real(r.m.y()) << ','
            << format_real(r.m.z()) << ',' << format_real(r.triple) << '\n';
    }
}

/// Largest disagreement between the operator path and the Bloch path, per quantity.
struct DualPathReport {
    double v_H = 0.0;
    double a_H = 0.0;
    double sigma_Hdot = 0.0;
    double exp_H = 0.0;
    double exp_Hdot = 0.0;
    double bloch = 0.0;  // componentwise |a_op - a_ode|

    [[nodiscard]] double max() const { return std::max({v_H, a_H, sigma_Hdot, exp_H, exp_Hdot}); }
};

inline DualPathReport compare_paths(const Trajectory& traj, const MagneticSchedule& field, const BlochTrajectory& path) {
    if (traj.grid.steps() != path.grid.steps()) {
        throw UsageError("compare_paths: grids differ");
    }
    DualPathReport rep;
    for (long i = 0; i < traj.grid.steps(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double t = traj.time(i);
        const PureState& psi = traj.states[idx];
        const BlochVector& a = path.points[idx];
        const LocalKinematics k = local_kinematics(traj.schedule.H(t), traj.schedule.Hdot(t), psi, 1.0);
        const Vec3 m = field.m(t);
        const Vec3 md = field.mdot(t);

        rep.bloch = std::max(rep.bloch, (bloch_from_state(psi).vec() - a.vec()).cwiseAbs().maxCoeff());
        rep.v_H = std::max(rep.v_H, std::abs(k.v_H() - vH_closed(a, m)));
        rep.sigma_Hdot = std::max(rep.sigma_Hdot, std::abs(k.sigma_Hdot - sigma_Hdot_closed(a, md)));
        rep.exp_H = std::max(rep.exp_H, std::abs(k.exp_H - (field.offset(t) + a.vec().dot(m))));
        rep.exp_Hdot = std::max(rep.exp_Hdot, std::abs(k.exp_Hdot - (field.offset_rate(t) + energy_loss_rate(a, md))));
        if (!k.degenerate() && vH_closed(a, m) >= kDegeneracyThreshold) {
            rep.a_H = std::max(rep.a_H, std::abs(k.sigma_H_rate() - aH_closed(a, m, md)));
        }
    }
    return rep;
}

} // namespace qgeom
