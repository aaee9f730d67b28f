#pragma once

// Randomized campaign over the inequality chain. Each trial builds a random
// schedule from its seed, propagates a random state and evaluates every
// per-sample check; violations carry enough JSON to replay the residual.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "json_io.hpp"
#include "linalg.hpp"
#include "propagator.hpp"
#include "qubit.hpp"
#include "schedule.hpp"

namespace qgeom {

// ---------------------------------------------------------------------------
// Checks and tolerances

enum class Check : std::size_t {
    main_bound,
    schwarz,
    decomposition,
    commutator_real,
    anticommutator_imag,
    love2_fd,
    uncertainty,
    uncertainty_random,
    ac1,
    dh_prime_mean,
    kappa_AC_imag,
    stationary_reduction,
    qubit_dual_path,
    qubit_bound,
    qubit_lagrange,
    qubit_identity,
    qubit_perpendicularity,
    qubit_saturation,
    qubit_vanishing_curvature,
    bloch_norm,
};

inline constexpr std::size_t kCheckCount = 20;

enum class Sense { at_least, at_most };

/// A check passes when value >= bound (at_least) or value <= bound (at_most),
/// with bound scaled by dt^dt_power.
struct CheckSpec {
    std::string_view id;
    Sense sense;
    double bound;
    int dt_power = 0;
};

using Tolerances = std::array<CheckSpec, kCheckCount>;

inline Tolerances default_tolerances() {
    return {{
        {"main_bound", Sense::at_least, -1e-9},
        {"schwarz", Sense::at_least, -1e-10},
        {"decomposition", Sense::at_most, 1e-9},
        {"commutator_real", Sense::at_most, 1e-10},
        {"anticommutator_imag", Sense::at_most, 1e-10},
        {"love2_fd", Sense::at_most, 5.0, 2},
        {"uncertainty", Sense::at_least, -1e-10},
        {"uncertainty_random", Sense::at_least, -1e-10},
        {"ac1", Sense::at_most, 1e-8},
        {"dh_prime_mean", Sense::at_most, 1e-8},
        {"kappa_AC_imag", Sense::at_most, 1e-8},
        {"stationary_reduction", Sense::at_most, 1e-9},
        {"qubit_dual_path", Sense::at_most, 1e-6},
        {"qubit_bound", Sense::at_most, 1e-10},
        {"qubit_lagrange", Sense::at_least, -1e-12},
        {"qubit_identity", Sense::at_most, 1e-9},
        {"qubit_perpendicularity", Sense::at_most, 1e-8},
        {"qubit_saturation", Sense::at_most, 1e-6},
        {"qubit_vanishing_curvature", Sense::at_most, 1e-8},
        {"bloch_norm", Sense::at_most, 1e-9},
    }};
}

inline std::size_t check_index(Check c) { return static_cast<std::size_t>(c); }

inline std::optional<Check> check_from_id(std::string_view id) {
    const Tolerances t = default_tolerances();
    for (std::size_t k = 0; k < kCheckCount; ++k) {
        if (t[k].id == id) {
            return static_cast<Check>(k);
        }
    }
    return std::nullopt;
}

inline double effective_bound(const CheckSpec& spec, double dt) {
    return spec.dt_power == 0 ? spec.bound : spec.bound * std::pow(dt, spec.dt_power);
}

inline bool passes(const CheckSpec& spec, double value, double dt) {
    const double b = effective_bound(spec, dt);
    return spec.sense == Sense::at_least ? value >= b : value <= b;
}

inline json tolerances_to_json(const Tolerances& tol) {
    json out = json::object();
    for (const auto& c : tol) {
        json entry{{"sense", c.sense == Sense::at_least ? ">=" : "<="}, {"bound", c.bound}};
        if (c.dt_power != 0) {
            entry["scale"] = "dt^" + std::to_string(c.dt_power);
        }
        out[std::string(c.id)] = std::move(entry);
    }
    return out;
}

/// Above this |a.m| a qubit sample is not on the perpendicular branch.
inline constexpr double kPerpendicularThreshold = 1e-9;

// ---------------------------------------------------------------------------
// Per-sample residuals. run_trial and replay share these, so a replay
// recomputes the same floating-point operations.

using Residuals = std::array<std::optional<double>, kCheckCount>;

struct SampleEvaluation {
    Residuals residuals;
    bool degenerate = false;
    double variance_H = 0.0;
    double anticommutator = 0.0;
    std::optional<double> a_H;
    std::optional<double> kappa_AC;
    /// |a.mdot| where |a.m| is tiny on a non-fixed-axis qubit schedule (reported only).
    std::optional<double> perpendicularity_elsewhere;
};

namespace detail {

inline void set(Residuals& r, Check c, double v) { r[check_index(c)] = v; }

inline void qubit_residuals(SampleEvaluation& ev, const HamiltonianSchedule& sched, const MagneticSchedule& field,
                            double t, const LocalKinematics& k, const PointAnalysis& pa, const BlochVector& a) {
    Residuals& r = ev.residuals;
    const Vec3 m = field.m(t);
    const Vec3 md = field.mdot(t);
    const double v_closed = vH_closed(a, m);

    double dual = std::max({std::abs(k.v_H() - v_closed), std::abs(k.sigma_Hdot - sigma_Hdot_closed(a, md)),
                            std::abs(k.exp_H - (field.offset(t) + a.vec().dot(m))),
                            std::abs(k.exp_Hdot - (field.offset_rate(t) + energy_loss_rate(a, md)))});
    if (!k.degenerate() && v_closed >= kDegeneracyThreshold) {
        // v_H a_H = <{dHdot, dH}>/2 stays well conditioned as v_H -> 0
        dual = std::max(dual, std::abs(0.5 * k.anticommutator - aH_closed(a, m, md) * v_closed));
    }
    set(r, Check::qubit_dual_path, dual);

    const QubitBoundReport rep = qubit_bound_report(a, m, md);
    set(r, Check::qubit_bound, rep.lhs - rep.rhs);
    set(r, Check::qubit_lagrange, rep.lagrange_lhs - rep.lagrange_rhs);
    if (v_closed >= kDegeneracyThreshold) {
        // (rhs - lhs) v_H^2 = triple^2 exactly
        const double scale = std::max(1.0, m.squaredNorm() * md.squaredNorm());
        set(r, Check::qubit_identity,
            std::abs((rep.rhs - rep.lhs) * v_closed * v_closed - rep.triple * rep.triple) / scale);
    }

    const double am = std::abs(a.vec().dot(m));
    if (am <= kPerpendicularThreshold) {
        const double amd = std::abs(a.vec().dot(md));
        if (sched.family() == Family::fixed_axis_qubit) {
            set(r, Check::qubit_perpendicularity, amd);
            if (pa.a_H) {
                set(r, Check::qubit_saturation, std::abs(std::abs(*pa.a_H) - md.norm()));
            }
            if (pa.kappa_LT_sq && pa.kappa_AC) {
                set(r, Check::qubit_vanishing_curvature,
                    std::max(std::abs(*pa.kappa_LT_sq), std::abs(pa.kappa_AC->value.real())));
            }
        } else {
            ev.perpendicularity_elsewhere = amd;
        }
    }
}

} // namespace detail

/// Every per-sample residual except the neighbor-based love2 check.
/// `bloch` is the Bloch-path point at t for qubit schedules.
inline SampleEvaluation evaluate_sample(const HamiltonianSchedule& sched, const MagneticSchedule* field, double t,
                                        const PureState& psi, const std::optional<BlochVector>& bloch) {
    SampleEvaluation ev;
    Residuals& r = ev.residuals;
    const HermitianOperator h = sched.H(t);
    const HermitianOperator hdot = sched.Hdot(t);
    const PointAnalysis pa = analyze_point(h, hdot, psi, sched.hbar());
    const LocalKinematics& k = pa.kin;
    const ProofChain pc = proof_chain(k, h, hdot, psi);

    ev.degenerate = k.degenerate();
    ev.variance_H = variance(h, psi);
    ev.anticommutator = k.anticommutator;
    ev.a_H = pa.a_H;

    detail::set(r, Check::main_bound, pa.main_slack);
    detail::set(r, Check::schwarz, pc.schwarz_slack);
    detail::set(r, Check::commutator_real, pc.commutator_real);
    detail::set(r, Check::anticommutator_imag, pc.anticommutator_imag);
    detail::set(r, Check::uncertainty, pc.uncertainty_slack);
    if (!ev.degenerate) {
        detail::set(r, Check::decomposition, pc.decomposition_residual);
        // rhs is a difference of two terms of size hbar^2 sigma_Hdot^2 / sigma_H^4
        const auto [lhs, rhs] = *pa.ac1;
        const double s2 = k.sigma_H * k.sigma_H;
        const double terms = k.hbar * k.hbar * k.sigma_Hdot * k.sigma_Hdot / (s2 * s2);
        detail::set(r, Check::ac1, std::abs(lhs - rhs) / std::max(1.0, terms));
        detail::set(r, Check::dh_prime_mean, *pa.dh_prime_mean);
        detail::set(r, Check::kappa_AC_imag, pa.kappa_AC->imag_residual());
        ev.kappa_AC = pa.kappa_AC->value.real();
        if (sched.family() == Family::constant) {
            detail::set(r, Check::stationary_reduction, std::abs(pa.kappa_AC->value.real() - *pa.kappa_LT_sq));
        }
    }
    if (field && bloch) {
        detail::qubit_residuals(ev, sched, *field, t, k, pa, *bloch);
    }
    return ev;
}

/// |[Var(t+dt) - Var(t-dt)] / (2 dt) - <{dHdot, dH}>(t)|
inline double love2_residual(double var_prev, double var_next, double dt, double anticommutator) {
    return std::abs((var_next - var_prev) / (2.0 * dt) - anticommutator);
}

/// Var(A) Var(B) - |<[A, B]>|^2 / 4
inline double uncertainty_slack(const HermitianOperator& a, const HermitianOperator& b, const PureState& psi) {
    return variance(a, psi) * variance(b, psi) - 0.25 * std::norm(expectation_complex(commutator(a, b), psi));
}

// ---------------------------------------------------------------------------
// Trials

struct TrialSpec {
    Index dim = 2;
    Family family = Family::constant;
    std::uint64_t seed = 0;
    TimeGrid grid{0.0, 1.0, 1001};
    double ensemble_scale = 1.0;

    void validate() const {
        if (dim < 2 || dim > 16) {
            throw UsageError("trial dim must lie in [2, 16]");
        }
        if (grid.steps() < 11 || grid.steps() > 100001) {
            throw UsageError("trial steps must lie in [11, 100001]");
        }
        if (is_qubit_family(family) && dim != 2) {
            throw UsageError(std::string(family_name(family)) + " requires dim 2");
        }
        if (!(ensemble_scale > 0.0) || !std::isfinite(ensemble_scale)) {
            throw UsageError("ensemble_scale must be positive");
        }
    }
};

inline json trial_spec_to_json(const TrialSpec& s) {
    return {{"dim", s.dim},
            {"family", std::string(family_name(s.family))},
            {"seed", s.seed},
            {"grid", grid_to_json(s.grid)},
            {"ensemble_scale", s.ensemble_scale}};
}

struct ViolationRecord {
    std::string check;
    double t = 0.0;
    double value = 0.0;
    double bound = 0.0;
    /// Full schedule document (schedule_to_json) plus state and check-specific inputs.
    json schedule;
    json state;
    json extra = json::object();
};

inline json violation_to_json(const ViolationRecord& v) {
    return {{"check", v.check}, {"t", v.t},         {"value", v.value}, {"bound", v.bound},
            {"schedule", v.schedule}, {"state", v.state}, {"extra", v.extra}};
}

inline ViolationRecord violation_from_json(const json& j) {
    const std::string p = "$";
    ViolationRecord v;
    v.check = detail::require_key(j, "check", p).get<std::string>();
    v.t = number_from_json(detail::require_key(j, "t", p), p + ".t");
    v.value = number_from_json(detail::require_key(j, "value", p), p + ".value");
    v.bound = number_from_json(detail::require_key(j, "bound", p), p + ".bound");
    v.schedule = detail::require_key(j, "schedule", p);
    v.state = detail::require_key(j, "state", p);
    v.extra = j.value("extra", json::object());
    return v;
}

struct CheckStats {
    long evaluated = 0;
    long violations = 0;
    /// Minimum for at_least checks, maximum for at_most checks.
    std::optional<double> worst;
};

struct TrialReport {
    std::size_t index = 0;
    TrialSpec spec;
    std::array<CheckStats, kCheckCount> checks{};
    std::optional<double> min_kappa_AC;
    std::optional<double> max_accel_fd_deviation;
    std::optional<double> max_bloch_drift;
    double max_norm_defect = 0.0;
    long degenerate_steps = 0;
    long skipped_stencils = 0;
    long perpendicularity_exceptions = 0;
    std::vector<std::string> warnings;
    std::optional<std::string> error;
    std::vector<ViolationRecord> records;

    [[nodiscard]] const CheckStats& stats(Check c) const { return checks[check_index(c)]; }

    [[nodiscard]] long total_violations() const {
        long n = error ? 1 : 0;
        for (const auto& c : checks) {
            n += c.violations;
        }
        return n;
    }

    [[nodiscard]] double min_main_slack() const { return stats(Check::main_bound).worst.value_or(0.0); }
    [[nodiscard]] double min_schwarz_slack() const { return stats(Check::schwarz).worst.value_or(0.0); }
    [[nodiscard]] double max_decomposition_residual() const { return stats(Check::decomposition).worst.value_or(0.0); }
    [[nodiscard]] double max_ac1_residual() const { return stats(Check::ac1).worst.value_or(0.0); }
    [[nodiscard]] double max_imag_residual() const {
        return std::max({stats(Check::commutator_real).worst.value_or(0.0),
                         stats(Check::anticommutator_imag).worst.value_or(0.0),
                         stats(Check::kappa_AC_imag).worst.value_or(0.0)});
    }
};

/// Records kept per check per trial; counters keep counting past this.
inline constexpr long kMaxRecordsPerCheck = 3;

/// Random schedule, initial state and (for qubits) field for a trial.
struct TrialSetup {
    HamiltonianSchedule schedule;
    PureState psi0;
    std::vector<double> knots;
};

namespace detail {

inline Vec3 random_unit3(SeededRng& rng) {
    for (;;) {
        const Vec3 v(rng.normal(), rng.normal(), rng.normal());
        if (v.norm() > 1e-8) {
            return v / v.norm();
        }
    }
}

} // namespace detail

/// Draw order is fixed, so a seed always produces the same setup.
/// Operator entries use scale / sqrt(2 dim), putting the spectral radius near `ensemble_scale`.
inline TrialSetup build_trial(const TrialSpec& spec) {
    spec.validate();
    SeededRng rng(spec.seed);
    const double s = spec.ensemble_scale;
    const double entry = s / std::sqrt(2.0 * static_cast<double>(spec.dim));
    auto herm = [&] { return random_hermitian(spec.dim, entry, rng); };

    switch (spec.family) {
    case Family::constant: {
        HamiltonianSchedule sched(ConstantParams{herm()});
        return {sched, random_state(spec.dim, rng), {}};
    }
    case Family::fourier: {
        HermitianOperator a = herm();
        HermitianOperator b = herm();
        HermitianOperator c = herm();
        const double omega = rng.uniform(0.1, 5.0);
        HamiltonianSchedule sched(FourierParams{std::move(a), {FourierTerm{std::move(b), std::move(c), omega}}});
        return {sched, random_state(spec.dim, rng), {}};
    }
    case Family::fixed_axis_qubit: {
        const Vec3 n = detail::random_unit3(rng);
        const double m0 = rng.uniform(0.5, 1.5) * s;
        const double alpha = rng.uniform(-0.25, 0.25) * s;
        Vec3 a = detail::random_unit3(rng);
        a -= a.dot(n) * n;
        if (a.norm() < 1e-6) {
            a = n.unitOrthogonal();
        }
        HamiltonianSchedule sched(FixedAxisParams{m0 * n, alpha});
        return {sched, state_from_bloch(BlochVector(a)), {}};
    }
    case Family::rotating_field_qubit: {
        const double m0 = rng.uniform(0.5, 1.5) * s;
        const double omega = rng.uniform(0.1, 5.0);
        HamiltonianSchedule sched(RotatingFieldParams{m0, omega});
        return {sched, random_state(2, rng), {}};
    }
    case Family::piecewise_linear: {
        const TimeGrid& g = spec.grid;
        const double span = g.t1() - g.t0();
        // Interior knot halfway between two grid points so dH/dt exists on the grid.
        const double mid = g.at(g.steps() / 2) + 0.5 * g.dt();
        std::vector<Knot> knots;
        for (double t : {g.t0() - 0.5 * span, mid, g.t1() + 0.5 * span}) {
            knots.push_back(Knot{t, herm()});
        }
        HamiltonianSchedule sched(PiecewiseLinearParams{std::move(knots)});
        return {sched, random_state(spec.dim, rng), {mid}};
    }
    }
    throw UsageError("unknown family");
}

inline std::optional<MagneticSchedule> magnetic_view(const HamiltonianSchedule& sched) {
    if (sched.dim() != 2 || sched.hbar() != 1.0 || sched.family() == Family::piecewise_linear) {
        return std::nullopt;
    }
    return MagneticSchedule::from_schedule(sched);
}

namespace detail {

struct TrialRecorder {
    TrialReport& report;
    const Tolerances& tol;
    double dt;
    json schedule_json;

    void observe(Check c, double value, double t, const PureState& psi, const json& extra) {
        const CheckSpec& spec = tol[check_index(c)];
        CheckStats& st = report.checks[check_index(c)];
        ++st.evaluated;
        if (!st.worst) {
            st.worst = value;
        } else {
            st.worst = spec.sense == Sense::at_least ? std::min(*st.worst, value) : std::max(*st.worst, value);
        }
        if (!passes(spec, value, dt)) {
            ++st.violations;
            if (st.violations <= kMaxRecordsPerCheck) {
                report.records.push_back(ViolationRecord{std::string(spec.id), t, value, effective_bound(spec, dt),
                                                         schedule_json, state_to_json(psi), extra});
            }
        }
    }
};

inline json bloch_json(const BlochVector& a) { return json::array({a.x(), a.y(), a.z()}); }

} // namespace detail

inline TrialReport run_trial(const TrialSpec& spec, const Tolerances& tol = default_tolerances(), std::size_t index = 0) {
    TrialReport report;
    report.index = index;
    report.spec = spec;
    try {
        const TrialSetup setup = build_trial(spec);
        const HamiltonianSchedule& sched = setup.schedule;
        const TimeGrid& grid = spec.grid;
        const Trajectory traj = propagate(sched, setup.psi0, grid);
        report.max_norm_defect = traj.max_norm_defect;
        report.warnings = traj.warnings;

        const std::optional<MagneticSchedule> field = magnetic_view(sched);
        std::optional<BlochTrajectory> path;
        if (field) {
            path = integrate_bloch(*field, bloch_from_state(setup.psi0), grid);
            report.max_bloch_drift = path->max_norm_drift;
        }

        const double dt = grid.dt();
        detail::TrialRecorder rec{report, tol, dt, schedule_to_json(sched)};
        const long n = grid.steps();
        std::vector<SampleEvaluation> evals;
        evals.reserve(static_cast<std::size_t>(n));
        for (long i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            const double t = grid.at(i);
            const PureState& psi = traj.states[idx];
            std::optional<BlochVector> a;
            json extra = json::object();
            if (path) {
                a = path->points[idx];
                extra["bloch"] = detail::bloch_json(*a);
            }
            SampleEvaluation ev = evaluate_sample(sched, field ? &*field : nullptr, t, psi, a);
            if (ev.degenerate) {
                ++report.degenerate_steps;
            }
            if (ev.kappa_AC) {
                report.min_kappa_AC = std::min(report.min_kappa_AC.value_or(*ev.kappa_AC), *ev.kappa_AC);
            }
            if (ev.perpendicularity_elsewhere && *ev.perpendicularity_elsewhere > 1e-8) {
                ++report.perpendicularity_exceptions;
            }
            for (std::size_t c = 0; c < kCheckCount; ++c) {
                if (ev.residuals[c]) {
                    rec.observe(static_cast<Check>(c), *ev.residuals[c], t, psi, extra);
                }
            }
            evals.push_back(std::move(ev));
        }

        for (long i = 1; i + 1 < n; ++i) {
            const double lo = grid.at(i - 1);
            const double hi = grid.at(i + 1);
            const bool straddles = std::any_of(setup.knots.begin(), setup.knots.end(),
                                               [&](double k) { return k > lo && k < hi; });
            if (straddles) {
                ++report.skipped_stencils;
                continue;
            }
            const auto idx = static_cast<std::size_t>(i);
            const double value =
                love2_residual(evals[idx - 1].variance_H, evals[idx + 1].variance_H, dt, evals[idx].anticommutator);
            json extra{{"t_prev", lo},
                       {"t_next", hi},
                       {"dt", dt},
                       {"state_prev", state_to_json(traj.states[idx - 1])},
                       {"state_next", state_to_json(traj.states[idx + 1])}};
            rec.observe(Check::love2_fd, value, grid.at(i), traj.states[idx], extra);

            if (evals[idx].a_H && !evals[idx - 1].degenerate && !evals[idx + 1].degenerate) {
                const double fd = (std::sqrt(evals[idx + 1].variance_H) - std::sqrt(evals[idx - 1].variance_H)) /
                                  (2.0 * dt * sched.hbar());
                const double dev = std::abs(fd - *evals[idx].a_H);
                report.max_accel_fd_deviation = std::max(report.max_accel_fd_deviation.value_or(dev), dev);
            }
        }

        if (path) {
            rec.observe(Check::bloch_norm, path->max_norm_drift, grid.t0(), setup.psi0,
                        json{{"a0", detail::bloch_json(path->points.front())}, {"grid", grid_to_json(grid)}});
        }

        // One random observable pair per trial, drawn after the schedule from a derived stream.
        SeededRng pair_rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
        const double entry = spec.ensemble_scale / std::sqrt(2.0 * static_cast<double>(spec.dim));
        const HermitianOperator a = random_hermitian(spec.dim, entry, pair_rng);
        const HermitianOperator b = random_hermitian(spec.dim, entry, pair_rng);
        rec.observe(Check::uncertainty_random, uncertainty_slack(a, b, setup.psi0), grid.t0(), setup.psi0,
                    json{{"A", matrix_to_json(a.matrix())}, {"B", matrix_to_json(b.matrix())}});
    } catch (const std::exception& e) {
        report.error = e.what();
    }
    return report;
}

/// Recomputes a violation's residual from its serialized inputs.
inline double replay(const ViolationRecord& v) {
    const std::optional<Check> check = check_from_id(v.check);
    if (!check) {
        throw UsageError("unknown check id '" + v.check + "'");
    }
    const HamiltonianSchedule sched = schedule_from_json(v.schedule);
    const PureState psi = state_from_json(v.state, sched.dim(), "$.state");

    switch (*check) {
    case Check::love2_fd: {
        const PureState prev = state_from_json(v.extra.at("state_prev"), sched.dim(), "$.extra.state_prev");
        const PureState next = state_from_json(v.extra.at("state_next"), sched.dim(), "$.extra.state_next");
        const double var_prev = variance(sched.H(v.extra.at("t_prev").get<double>()), prev);
        const double var_next = variance(sched.H(v.extra.at("t_next").get<double>()), next);
        const double anti = local_kinematics(sched.H(v.t), sched.Hdot(v.t), psi, sched.hbar()).anticommutator;
        return love2_residual(var_prev, var_next, v.extra.at("dt").get<double>(), anti);
    }
    case Check::uncertainty_random: {
        const HermitianOperator a(matrix_from_json(v.extra.at("A"), sched.dim(), "$.extra.A"));
        const HermitianOperator b(matrix_from_json(v.extra.at("B"), sched.dim(), "$.extra.B"));
        return uncertainty_slack(a, b, psi);
    }
    case Check::bloch_norm: {
        const MagneticSchedule field = MagneticSchedule::from_schedule(sched);
        const auto& a0 = v.extra.at("a0");
        const BlochVector start(a0.at(0).get<double>(), a0.at(1).get<double>(), a0.at(2).get<double>());
        return integrate_bloch(field, start, grid_from_json(v.extra.at("grid"), "$.extra.grid")).max_norm_drift;
    }
    default: {
        const std::optional<MagneticSchedule> field = magnetic_view(sched);
        std::optional<BlochVector> a;
        if (v.extra.contains("bloch")) {
            const auto& b = v.extra.at("bloch");
            a = BlochVector(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
        }
        const SampleEvaluation ev = evaluate_sample(sched, field ? &*field : nullptr, v.t, psi, a);
        const auto& r = ev.residuals[check_index(*check)];
        if (!r) {
            throw UsageError("check '" + v.check + "' does not apply to the recorded sample");
        }
        return *r;
    }
    }
}

inline json trial_to_json(const TrialReport& r, const Tolerances& tol) {
    json checks = json::object();
    for (std::size_t c = 0; c < kCheckCount; ++c) {
        const CheckStats& st = r.checks[c];
        checks[std::string(tol[c].id)] = {{"evaluated", st.evaluated},
                                          {"violations", st.violations},
                                          {"worst", st.worst ? json(*st.worst) : json(nullptr)}};
    }
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    json out{{"index", r.index},
             {"spec", trial_spec_to_json(r.spec)},
             {"min_main_slack", r.min_main_slack()},
             {"min_schwarz_slack", r.min_schwarz_slack()},
             {"max_decomposition_residual", r.max_decomposition_residual()},
             {"max_imag_residual", r.max_imag_residual()},
             {"max_ac1_residual", r.max_ac1_residual()},
             {"min_kappa_AC", opt(r.min_kappa_AC)},
             {"max_accel_fd_deviation", opt(r.max_accel_fd_deviation)},
             {"max_bloch_drift", opt(r.max_bloch_drift)},
             {"max_norm_defect", r.max_norm_defect},
             {"degenerate_steps", r.degenerate_steps},
             {"skipped_stencils", r.skipped_stencils},
             {"perpendicularity_exceptions", r.perpendicularity_exceptions},
             {"violations", r.total_violations()},
             {"checks", std::move(checks)},
             {"warnings", r.warnings},
             {"records", json::array()}};
    if (r.error) {
        out["error"] = *r.error;
    }
    for (const auto& v : r.records) {
        out["records"].push_back(violation_to_json(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Campaigns

struct CampaignConfig {
    long n_trials = 1;
    std::uint64_t base_seed = 0;
    std::vector<Index> dims{2, 3, 4, 8};
    std::vector<Family> families{Family::constant, Family::fourier, Family::fixed_axis_qubit,
                                 Family::rotating_field_qubit};
    TimeGrid grid{0.0, 1.0, 1001};
    double ensemble_scale = 0.15;
    Tolerances tolerances = default_tolerances();
    /// 0 means QGEOM_THREADS or the machine's concurrency.
    unsigned threads = 0;
};

struct CampaignReport {
    CampaignConfig config;
    std::vector<TrialReport> trials;

    [[nodiscard]] long violations() const {
        long n = 0;
        for (const auto& t : trials) {
            n += t.total_violations();
        }
        return n;
    }
};

/// Valid (dim, family) pairs in input order; qubit families pair only with dim 2.
inline std::vector<std::pair<Index, Family>> campaign_combos(const CampaignConfig& cfg) {
    std::vector<std::pair<Index, Family>> out;
    for (Index d : cfg.dims) {
        for (Family f : cfg.families) {
            if (!is_qubit_family(f) || d == 2) {
                out.emplace_back(d, f);
            }
        }
    }
    return out;
}

/// Trial i uses combo i mod |combos| and seed base_seed + i.
inline TrialSpec campaign_trial_spec(const CampaignConfig& cfg, const std::vector<std::pair<Index, Family>>& combos,
                                     long i) {
    const auto& [d, f] = combos[static_cast<std::size_t>(i) % combos.size()];
    return TrialSpec{d, f, cfg.base_seed + static_cast<std::uint64_t>(i), cfg.grid, cfg.ensemble_scale};
}

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("QGEOM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) {
            return static_cast<unsigned>(v);
        }
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

inline CampaignReport run_campaign(const CampaignConfig& cfg) {
    if (cfg.n_trials < 1) {
        throw UsageError("n_trials must be at least 1");
    }
    const auto combos = campaign_combos(cfg);
    if (combos.empty()) {
        throw UsageError("no valid (dim, family) combination: qubit families need dim 2");
    }
    for (const auto& [d, f] : combos) {
        TrialSpec{d, f, 0, cfg.grid, cfg.ensemble_scale}.validate();
    }

    CampaignReport report{cfg, std::vector<TrialReport>(static_cast<std::size_t>(cfg.n_trials))};
    std::atomic<long> next{0};
    auto worker = [&] {
        for (long i = next++; i < cfg.n_trials; i = next++) {
            report.trials[static_cast<std::size_t>(i)] =
                run_trial(campaign_trial_spec(cfg, combos, i), cfg.tolerances, static_cast<std::size_t>(i));
        }
    };
    const unsigned n_threads =
        std::min<unsigned>(resolve_threads(cfg.threads), static_cast<unsigned>(std::min<long>(cfg.n_trials, 1024)));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < n_threads; ++k) {
            pool.emplace_back(worker);
        }
    }
    return report;
}

inline json campaign_to_json(const CampaignReport& r) {
    const Tolerances& tol = r.config.tolerances;
    json trials = json::array();
    json per_check = json::object();
    std::array<CheckStats, kCheckCount> agg{};
    double min_main = std::numeric_limits<double>::infinity();
    std::optional<double> min_kappa;
    long degenerate = 0;
    long errors = 0;
    for (const auto& t : r.trials) {
        trials.push_back(trial_to_json(t, tol));
        min_main = std::min(min_main, t.min_main_slack());
        if (t.min_kappa_AC) {
            min_kappa = std::min(min_kappa.value_or(*t.min_kappa_AC), *t.min_kappa_AC);
        }
        degenerate += t.degenerate_steps;
        errors += t.error ? 1 : 0;
        for (std::size_t c = 0; c < kCheckCount; ++c) {
            const CheckStats& st = t.checks[c];
            agg[c].evaluated += st.evaluated;
            agg[c].violations += st.violations;
            if (st.worst) {
                agg[c].worst = !agg[c].worst ? *st.worst
                               : tol[c].sense == Sense::at_least ? std::min(*agg[c].worst, *st.worst)
                                                                  : std::max(*agg[c].worst, *st.worst);
            }
        }
    }
    for (std::size_t c = 0; c < kCheckCount; ++c) {
        per_check[std::string(tol[c].id)] = {{"evaluated", agg[c].evaluated},
                                             {"violations", agg[c].violations},
                                             {"worst", agg[c].worst ? json(*agg[c].worst) : json(nullptr)}};
    }
    json dims = json::array();
    for (Index d : r.config.dims) {
        dims.push_back(d);
    }
    json fams = json::array();
    for (Family f : r.config.families) {
        fams.push_back(std::string(family_name(f)));
    }
    return {{"config",
             {{"n_trials", r.config.n_trials},
              {"base_seed", r.config.base_seed},
              {"dims", dims},
              {"families", fams},
              {"grid", grid_to_json(r.config.grid)},
              {"ensemble_scale", r.config.ensemble_scale},
              {"seed_rule", "seed = base_seed + trial index"}}},
            {"tolerances", tolerances_to_json(tol)},
            {"trials", std::move(trials)},
            {"summary",
             {{"min_main_slack", min_main},
              {"min_kappa_AC", min_kappa ? json(*min_kappa) : json(nullptr)},
              {"violations", r.violations()},
              {"trial_errors", errors},
              {"degenerate_steps", degenerate},
              {"checks", std::move(per_check)}}}};
}

} // namespace qgeom
