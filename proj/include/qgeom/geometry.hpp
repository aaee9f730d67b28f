#pragma once

// Kinematics and curvature of pure-state evolution in projective Hilbert space,
// plus the scalar acceleration / power / jerk bound formulas.
//
// Conventions: sigma_H is the energy spread, v_H = sigma_H / hbar the
// Fubini-Study speed and a_H = d(sigma_H)/dt / hbar its rate. The main bound is
// (d sigma_H/dt)^2 <= sigma_Hdot^2; with hbar = 1 this reads a_H^2 <= sigma_Hdot^2.

#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "propagator.hpp"
#include "schedule.hpp"

namespace qgeom {

/// Below this speed (hbar = 1 energy units) a sample is degenerate: Delta h is undefined.
inline constexpr double kDegeneracyThreshold = 1e-9;
/// Largest imaginary residue tolerated in the nonstationary curvature sum,
/// measured against max(1, <(Dh)^4> + <(Dh')^2>).
inline constexpr double kCurvatureImagTolerance = 1e-8;

struct GeometrySample {
    double t = 0.0;
    double s_arc = 0.0;
    double exp_H = 0.0;
    double sigma_H = 0.0;
    double v_H = 0.0;
    std::optional<double> a_H_analytic;
    std::optional<double> a_H_fd;
    double sigma_Hdot = 0.0;
    /// sigma_Hdot^2 - (d sigma_H/dt)^2; equals sigma_Hdot^2 - a_H^2 when hbar = 1.
    double main_slack = 0.0;
    std::optional<double> kappa_LT_sq;
    std::optional<double> kappa_AC_sq;
    bool degenerate = false;
};

// ---------------------------------------------------------------------------
// Per-point quantities

/// Centered operators and their spreads at one instant.
struct LocalKinematics {
    HermitianOperator delta_H;
    HermitianOperator delta_Hdot;
    double exp_H;
    double exp_Hdot;
    double sigma_H;
    double sigma_Hdot;
    /// <{dHdot, dH}> = d<(dH)^2>/dt
    double anticommutator;
    double hbar;

    [[nodiscard]] double v_H() const { return sigma_H / hbar; }
    [[nodiscard]] bool degenerate() const { return v_H() < kDegeneracyThreshold; }
    /// d sigma_H / dt; only meaningful when not degenerate.
    [[nodiscard]] double sigma_H_rate() const { return anticommutator / (2.0 * sigma_H); }
};

inline LocalKinematics local_kinematics(const HermitianOperator& h, const HermitianOperator& hdot,
                                        const PureState& psi, double hbar) {
    detail::require_same_dim(h.dim(), hdot.dim(), "local_kinematics");
    detail::require_same_dim(h.dim(), psi.dim(), "local_kinematics");
    HermitianOperator dh = centered(h, psi);
    HermitianOperator dhdot = centered(hdot, psi);
    const Vector u = dh.matrix() * psi.amplitudes();
    const Vector w = dhdot.matrix() * psi.amplitudes();
    const double exp_h = expectation(h, psi);
    const double exp_hdot = expectation(hdot, psi);
    const double anti = expectation(anticommutator(dhdot, dh), psi);
    return LocalKinematics{std::move(dh), std::move(dhdot), exp_h, exp_hdot, u.norm(), w.norm(), anti, hbar};
}

inline void require_nondegenerate(const LocalKinematics& k) {
    if (k.degenerate()) {
        throw DegenerateStateError("sigma_H/hbar = " + std::to_string(k.v_H()) + " is below the degeneracy threshold");
    }
}

/// v_H = sigma_H / hbar
inline double speed_vH(const HermitianOperator& h, const PureState& psi, double hbar = 1.0) {
    return standard_deviation(h, psi) / hbar;
}

inline double sigma_Hdot(const HermitianOperator& hdot, const PureState& psi) { return standard_deviation(hdot, psi); }

/// a_H = <{dHdot, dH}> / (2 sigma_H hbar). Signed.
inline double accel_aH_analytic(const HermitianOperator& h, const HermitianOperator& hdot, const PureState& psi,
                                double hbar = 1.0) {
    const LocalKinematics k = local_kinematics(h, hdot, psi, hbar);
    require_nondegenerate(k);
    return k.sigma_H_rate() / hbar;
}

/// Central difference of sigma_H along the propagated grid.
inline double accel_aH_fd(const Trajectory& traj, long index) {
    if (index < 1 || index > traj.grid.steps() - 2) {
        throw UsageError("accel_aH_fd: index must lie in [1, steps-2]");
    }
    const auto i = static_cast<std::size_t>(index);
    const double lo = standard_deviation(traj.schedule.H(traj.time(index - 1)), traj.states[i - 1]);
    const double hi = standard_deviation(traj.schedule.H(traj.time(index + 1)), traj.states[i + 1]);
    return (hi - lo) / (2.0 * traj.grid.dt() * traj.hbar());
}

/// Cumulative trapezoidal integral of v_H.
inline std::vector<double> arc_length(const std::vector<GeometrySample>& samples) {
    std::vector<double> s(samples.size(), 0.0);
    if (samples.size() < 2) {
        return s;
    }
    const double dt = samples[1].t - samples[0].t;
    if (!(dt > 0.0)) {
        throw UsageError("arc_length: samples must be strictly time-ordered");
    }
    for (std::size_t k = 1; k < samples.size(); ++k) {
        const double step = samples[k].t - samples[k - 1].t;
        if (!(step > 0.0)) {
            throw UsageError("arc_length: samples must be strictly time-ordered");
        }
        if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt))) {
            throw UsageError("arc_length: samples must be uniformly spaced");
        }
        s[k] = s[k - 1] + 0.5 * step * (samples[k].v_H + samples[k - 1].v_H);
    }
    return s;
}

/// Delta h = dH / (hbar v_H) = dH / sigma_H
inline HermitianOperator delta_h(const LocalKinematics& k) {
    require_nondegenerate(k);
    return (1.0 / k.sigma_H) * k.delta_H;
}

/// Delta h' = (1/v_H) d(Delta h)/dt with d(dH)/dt = dHdot.
inline HermitianOperator delta_h_prime(const LocalKinematics& k) {
    require_nondegenerate(k);
    const double s = k.sigma_H;
    const double rate = k.sigma_H_rate();
    return HermitianOperator(k.hbar / s * (k.delta_Hdot.matrix() / s - k.delta_H.matrix() * (rate / (s * s))));
}

namespace detail {

/// <(Dh)^4> - <(Dh)^2>^2 with explicit operator powers.
inline Complex stationary_curvature(const HermitianOperator& dh, const PureState& psi) {
    const HermitianOperator dh2 = dh.squared();
    const Complex m2 = expectation_complex(dh2.as_square(), psi);
    const Complex m4 = expectation_complex(dh2 * dh2, psi);
    return m4 - m2 * m2;
}

} // namespace detail

/// kappa_LT^2 = <(Dh)^4> - <(Dh)^2>^2
inline double curvature_LT(const HermitianOperator& h, const PureState& psi, double hbar = 1.0) {
    const LocalKinematics k = local_kinematics(h, HermitianOperator::zero(h.dim()), psi, hbar);
    return detail::stationary_curvature(delta_h(k), psi).real();
}

/// Full complex value of the nonstationary curvature sum
/// <(Dh)^4> - <(Dh)^2>^2 + [<(Dh')^2> - <Dh'>^2] + i<[(Dh)^2, Dh']>,
/// with the magnitude its roundoff should be judged against.
struct CurvatureSum {
    Complex value;
    /// max(1, (||(Dh)^2|| + ||Dh'||)^2) in the infinity norm. Near degeneracy
    /// ||Dh'|| grows like 1/sigma_H^3 while the expectations grow like 1/sigma_H^4,
    /// so the expectations understate the size of the roundoff.
    double scale;

    [[nodiscard]] double imag_residual() const { return std::abs(value.imag()) / scale; }
};

inline CurvatureSum curvature_AC_sum(const LocalKinematics& k, const PureState& psi) {
    const HermitianOperator dh = delta_h(k);
    const HermitianOperator dhp = delta_h_prime(k);
    const HermitianOperator dh2 = dh.squared();
    const Complex m2 = expectation_complex(dh2.as_square(), psi);
    const Complex m4 = expectation_complex(dh2 * dh2, psi);
    const Complex p1 = expectation_complex(dhp.as_square(), psi);
    const Complex p2 = expectation_complex(dhp * dhp, psi);
    const Complex comm = expectation_complex(commutator(dh2, dhp), psi);
    const double norms = dh2.inf_norm() + dhp.inf_norm();
    return {(m4 - m2 * m2) + (p2 - p1 * p1) + kI * comm, std::max(1.0, norms * norms)};
}

inline double curvature_AC(const HermitianOperator& h, const HermitianOperator& hdot, const PureState& psi,
                           double hbar = 1.0) {
    const LocalKinematics k = local_kinematics(h, hdot, psi, hbar);
    const CurvatureSum sum = curvature_AC_sum(k, psi);
    if (sum.imag_residual() > kCurvatureImagTolerance) {
        throw NumericError("nonstationary curvature has imaginary residue " + std::to_string(sum.value.imag()));
    }
    return sum.value.real();
}

/// (lhs, rhs) of <(Dh')^2> = hbar^2 [sigma_Hdot^2 - (d sigma_H/dt)^2] / sigma_H^4.
/// lhs comes from operator algebra, rhs from the scalar spreads.
inline std::pair<double, double> delta_h_prime_sq_identity(const LocalKinematics& k, const PureState& psi) {
    const HermitianOperator dhp = delta_h_prime(k);
    const double lhs = expectation(dhp.squared(), psi);
    const double rate = k.sigma_H_rate();
    const double s2 = k.sigma_H * k.sigma_H;
    const double rhs = k.hbar * k.hbar * (k.sigma_Hdot * k.sigma_Hdot - rate * rate) / (s2 * s2);
    return {lhs, rhs};
}

inline std::pair<double, double> delta_h_prime_sq_identity(const HermitianOperator& h, const HermitianOperator& hdot,
                                                           const PureState& psi, double hbar = 1.0) {
    return delta_h_prime_sq_identity(local_kinematics(h, hdot, psi, hbar), psi);
}

/// sigma_Hdot^2 - (d sigma_H/dt)^2. Degenerate samples take the rate as 0.
inline double main_bound_slack(const LocalKinematics& k) {
    const double rate = k.degenerate() ? 0.0 : k.sigma_H_rate();
    return k.sigma_Hdot * k.sigma_Hdot - rate * rate;
}

inline double main_bound_slack(const HermitianOperator& h, const HermitianOperator& hdot, const PureState& psi,
                               double hbar = 1.0) {
    return main_bound_slack(local_kinematics(h, hdot, psi, hbar));
}

// ---------------------------------------------------------------------------
// Proof-chain residuals of the main bound

struct ProofChain {
    /// sigma_Hdot^2 sigma_H^2 - |<dH dHdot>|^2  (Schwarz step)
    double schwarz_slack;
    /// |4|<dH dHdot>|^2 - (|<[dH,dHdot]>|^2 + |<{dHdot,dH}>|^2)| / max(lhs, rhs)
    double decomposition_residual;
    /// |Re <[dH, dHdot]>|
    double commutator_real;
    /// |Im <{dHdot, dH}>|
    double anticommutator_imag;
    /// Var(H) Var(Hdot) - |<[H, Hdot]>|^2 / 4  (generalized uncertainty)
    double uncertainty_slack;
};

inline ProofChain proof_chain(const LocalKinematics& k, const HermitianOperator& h, const HermitianOperator& hdot,
                              const PureState& psi) {
    const SquareOperator prod = k.delta_H * k.delta_Hdot;
    const Complex cross = expectation_complex(prod, psi);
    const Complex comm = expectation_complex(commutator(k.delta_H, k.delta_Hdot), psi);
    const Complex anti = expectation_complex(anticommutator(k.delta_Hdot.as_square(), k.delta_H.as_square()), psi);

    const double lhs = 4.0 * std::norm(cross);
    const double rhs = std::norm(comm) + std::norm(anti);
    const double denom = std::max(lhs, rhs);

    const double var_h = variance(h, psi);
    const double var_hdot = variance(hdot, psi);
    const Complex raw_comm = expectation_complex(commutator(h, hdot), psi);

    return ProofChain{
        k.sigma_Hdot * k.sigma_Hdot * k.sigma_H * k.sigma_H - std::norm(cross),
        denom > 0.0 ? std::abs(lhs - rhs) / denom : 0.0,
        std::abs(comm.real()),
        std::abs(anti.imag()),
        var_h * var_hdot - 0.25 * std::norm(raw_comm),
    };
}

// ---------------------------------------------------------------------------
// Scalar bound formulas (SI units)

struct QslTimes {
    double mandelstam_tamm;
    double margolus_levitin;
    double tau_qsl;
};

/// (pi hbar / (2 dE), pi hbar / (2 (E - E0))) and their maximum.
inline QslTimes qsl_times(double delta_e, double mean_e_minus_e0, double hbar = 1.0) {
    if (!(delta_e > 0.0) || !(mean_e_minus_e0 > 0.0) || !(hbar > 0.0)) {
        throw UsageError("qsl_times: energies and hbar must be positive");
    }
    const double mt = std::numbers::pi * hbar / (2.0 * delta_e);
    const double ml = std::numbers::pi * hbar / (2.0 * mean_e_minus_e0);
    return {mt, ml, std::max(mt, ml)};
}

struct ParticleParams {
    double m0;    // rest mass, kg
    double c;     // m/s
    double hbar;  // J s
    std::optional<double> delta_x;  // position uncertainty, m
    std::optional<double> mu;       // minimum-uncertainty mass, kg
    std::optional<double> lambda;   // particle linear dimension, m

    /// CODATA 2018 electron.
    static ParticleParams electron() { return {9.1093837015e-31, 299792458.0, 1.054571817e-34, {}, {}, {}}; }

    [[nodiscard]] double compton_wavelength() const { return hbar / (m0 * c); }

    void validate() const {
        if (!(m0 > 0.0) || !(c > 0.0) || !(hbar > 0.0)) {
            throw UsageError("particle m0, c and hbar must be positive");
        }
        for (const auto& opt : {delta_x, mu, lambda}) {
            if (opt && !(*opt > 0.0)) {
                throw UsageError("optional particle parameters must be positive when present");
            }
        }
    }
};

struct CaianielloBounds {
    std::optional<double> a_max_1981;      // (mu/m0) c^2 / lambda
    double a_max_1984 = 0.0;               // 2 m0 c^3 / hbar
    std::optional<double> a_max_from_dx;   // c^2 / dx
    std::optional<double> p_max;           // (hbar/2) a_max^2 / c^2, with a_max = c^2/dx
};

inline CaianielloBounds caianiello_bounds(const ParticleParams& p) {
    p.validate();
    CaianielloBounds out;
    if (p.mu && p.lambda) {
        out.a_max_1981 = (*p.mu / p.m0) * (p.c * p.c / *p.lambda);
    }
    out.a_max_1984 = 2.0 * p.m0 * p.c * p.c * p.c / p.hbar;
    if (p.delta_x) {
        const double a = p.c * p.c / *p.delta_x;
        out.a_max_from_dx = a;
        out.p_max = 0.5 * p.hbar * a * a / (p.c * p.c);
    }
    return out;
}

struct PatiBounds {
    double a_max_t;     // 2 c v_H, m/s^2
    double jerk_bound;  // 2 c sigma_Hdot / hbar, m/s^3
};

inline PatiBounds pati_acceleration_and_jerk(double v_H, double sigma_hdot, const ParticleParams& p) {
    if (!(v_H >= 0.0) || !(sigma_hdot >= 0.0)) {
        throw UsageError("pati_acceleration_and_jerk: inputs must be nonnegative");
    }
    p.validate();
    return {2.0 * p.c * v_H, 2.0 * p.c * sigma_hdot / p.hbar};
}

// ---------------------------------------------------------------------------
// Trajectory sampling

/// Everything the sampler and the verifier need at one grid point.
struct PointAnalysis {
    LocalKinematics kin;
    double main_slack;
    std::optional<double> a_H;
    std::optional<double> kappa_LT_sq;
    std::optional<CurvatureSum> kappa_AC;
    std::optional<std::pair<double, double>> ac1;
    /// |<Dh'>| / max(1, sqrt(<(Dh')^2>))
    std::optional<double> dh_prime_mean;
};

inline PointAnalysis analyze_point(const HermitianOperator& h, const HermitianOperator& hdot, const PureState& psi,
                                   double hbar) {
    PointAnalysis out{local_kinematics(h, hdot, psi, hbar), 0.0, {}, {}, {}, {}, {}};
    const LocalKinematics& k = out.kin;
    out.main_slack = main_bound_slack(k);
    if (k.degenerate()) {
        return out;
    }
    out.a_H = k.sigma_H_rate() / hbar;
    const HermitianOperator dh = delta_h(k);
    const HermitianOperator dhp = delta_h_prime(k);
    out.kappa_LT_sq = detail::stationary_curvature(dh, psi).real();
    out.kappa_AC = curvature_AC_sum(k, psi);
    out.ac1 = delta_h_prime_sq_identity(k, psi);
    out.dh_prime_mean = std::abs(expectation(dhp, psi)) / std::max(1.0, std::sqrt(std::max(0.0, out.ac1->first)));
    return out;
}

/// One GeometrySample per grid point. A piecewise_linear knot on the grid
/// surfaces as a DomainError from dH/dt.
inline std::vector<GeometrySample> sample_trajectory(const Trajectory& traj) {
    const long n = traj.grid.steps();
    const double hbar = traj.hbar();
    std::vector<GeometrySample> samples(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double t = traj.time(i);
        const PureState& psi = traj.states[idx];
        const PointAnalysis pa = analyze_point(traj.schedule.H(t), traj.schedule.Hdot(t), psi, hbar);

        GeometrySample& s = samples[idx];
        s.t = t;
        s.exp_H = pa.kin.exp_H;
        s.sigma_H = pa.kin.sigma_H;
        s.v_H = pa.kin.v_H();
        s.sigma_Hdot = pa.kin.sigma_Hdot;
        s.main_slack = pa.main_slack;
        s.degenerate = pa.kin.degenerate();
        if (!s.degenerate) {
            s.a_H_analytic = pa.a_H;
            s.kappa_LT_sq = pa.kappa_LT_sq;
            if (pa.kappa_AC->imag_residual() > kCurvatureImagTolerance) {
                throw NumericError("nonstationary curvature has imaginary residue " +
                                   std::to_string(pa.kappa_AC->value.imag()) + " at t=" + std::to_string(t));
            }
            s.kappa_AC_sq = pa.kappa_AC->value.real();
        }
    }
    const double dt = traj.grid.dt();
    for (long i = 1; i + 1 < n; ++i) {
        auto& s = samples[static_cast<std::size_t>(i)];
        if (!s.degenerate) {
            s.a_H_fd = (samples[static_cast<std::size_t>(i + 1)].sigma_H - samples[static_cast<std::size_t>(i - 1)].sigma_H) /
                       (2.0 * dt * hbar);
        }
    }
    const std::vector<double> s_arc = arc_length(samples);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        samples[k].s_arc = s_arc[k];
    }
    return samples;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kGeometryCsvHeader =
    "t,s,exp_H,sigma_H,v_H,a_H_analytic,a_H_fd,sigma_Hdot,main_slack,kappa_LT_sq,kappa_AC_sq,degenerate";

/// Shortest decimal that round-trips to the same double.
inline std::string format_real(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return {buf, res.ptr};
}

inline std::string format_optional(const std::optional<double>& x) { return x ? format_real(*x) : std::string(); }

inline std::string geometry_csv_row(const GeometrySample& s) {
    std::string row;
    row.reserve(256);
    row += format_real(s.t) + ',' + format_real(s.s_arc) + ',' + format_real(s.exp_H) + ',' +
           format_real(s.sigma_H) + ',' + format_real(s.v_H) + ',' + format_optional(s.a_H_analytic) + ',' +
           format_optional(s.a_H_fd) + ',' + format_real(s.sigma_Hdot) + ',' + format_real(s.main_slack) + ',' +
           format_optional(s.kappa_LT_sq) + ',' + format_optional(s.kappa_AC_sq) + ',' +
           (s.degenerate ? "true" : "false");
    return row;
}

inline void write_geometry_csv(std::ostream& out, const std::vector<GeometrySample>& samples) {
    out << kGeometryCsvHeader << '\n';
    for (const auto& s : samples) {
        out << geometry_csv_row(s) << '\n';
    }
}

} // namespace qgeom
