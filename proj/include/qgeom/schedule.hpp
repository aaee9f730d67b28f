#pragma once

// Parametric time-dependent Hamiltonians H(t) with analytic dH/dt.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "json_io.hpp"
#include "linalg.hpp"

namespace qgeom {

enum class Family { constant, fourier, fixed_axis_qubit, rotating_field_qubit, piecewise_linear };

inline std::string_view family_name(Family f) {
    switch (f) {
    case Family::constant: return "constant";
    case Family::fourier: return "fourier";
    case Family::fixed_axis_qubit: return "fixed_axis_qubit";
    case Family::rotating_field_qubit: return "rotating_field_qubit";
    case Family::piecewise_linear: return "piecewise_linear";
    }
    return "unknown";
}

/// Accepts the canonical names plus the short qubit aliases used on the command line.
inline std::optional<Family> family_from_name(std::string_view name) {
    if (name == "constant") return Family::constant;
    if (name == "fourier") return Family::fourier;
    if (name == "fixed_axis_qubit" || name == "fixed_axis" || name == "fixed-axis") return Family::fixed_axis_qubit;
    if (name == "rotating_field_qubit" || name == "rotating_field" || name == "rotating") return Family::rotating_field_qubit;
    if (name == "piecewise_linear" || name == "piecewise-linear") return Family::piecewise_linear;
    return std::nullopt;
}

inline bool is_qubit_family(Family f) {
    return f == Family::fixed_axis_qubit || f == Family::rotating_field_qubit;
}

struct ConstantParams {
    HermitianOperator a;
};

/// H(t) = A + sum_k [B_k cos(w_k t) + C_k sin(w_k t)]
struct FourierTerm {
    HermitianOperator b;
    HermitianOperator c;
    double omega;
};

struct FourierParams {
    HermitianOperator a;
    std::vector<FourierTerm> terms;
};

/// m(t) = (|m0| + alpha t) m0/|m0|, H = m . sigma
struct FixedAxisParams {
    Eigen::Vector3d m0;
    double alpha;
};

/// m(t) = m0 (cos wt, sin wt, 0), H = m . sigma
struct RotatingFieldParams {
    double m0;
    double omega;
};

struct Knot {
    double t;
    HermitianOperator h;
};

/// Linear interpolation between knots; dH/dt is undefined at the knots.
struct PiecewiseLinearParams {
    std::vector<Knot> knots;
};

class HamiltonianSchedule {
public:
    using Params = std::variant<ConstantParams, FourierParams, FixedAxisParams, RotatingFieldParams, PiecewiseLinearParams>;

    explicit HamiltonianSchedule(Params params, double hbar = 1.0) : params_(std::move(params)), hbar_(hbar) {
        if (!(hbar_ > 0.0) || !std::isfinite(hbar_)) {
            throw UsageError("hbar must be positive and finite");
        }
        dim_ = std::visit([](const auto& p) { return validate(p); }, params_);
    }

    static HamiltonianSchedule constant(HermitianOperator a, double hbar = 1.0) {
        return HamiltonianSchedule(ConstantParams{std::move(a)}, hbar);
    }

    [[nodiscard]] Family family() const {
        switch (params_.index()) {
        case 0: return Family::constant;
        case 1: return Family::fourier;
        case 2: return Family::fixed_axis_qubit;
        case 3: return Family::rotating_field_qubit;
        default: return Family::piecewise_linear;
        }
    }

    [[nodiscard]] Index dim() const noexcept { return dim_; }
    [[nodiscard]] double hbar() const noexcept { return hbar_; }
    [[nodiscard]] const Params& params() const noexcept { return params_; }

    /// Closed interval on which H(t) is defined.
    [[nodiscard]] std::pair<double, double> domain() const {
        if (const auto* p = std::get_if<PiecewiseLinearParams>(&params_)) {
            return {p->knots.front().t, p->knots.back().t};
        }
        constexpr double inf = std::numeric_limits<double>::infinity();
        return {-inf, inf};
    }

    [[nodiscard]] HermitianOperator H(double t) const {
        require_in_domain(t);
        return std::visit([t](const auto& p) { return eval(p, t); }, params_);
    }

    [[nodiscard]] HermitianOperator Hdot(double t) const {
        require_in_domain(t);
        return std::visit([t](const auto& p) { return eval_rate(p, t); }, params_);
    }

private:
    void require_in_domain(double t) const {
        if (!std::isfinite(t)) {
            throw DomainError("time must be finite");
        }
        const auto [lo, hi] = domain();
        if (t < lo || t > hi) {
            throw DomainError("t=" + std::to_string(t) + " outside schedule domain [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
        }
    }

    static Index validate(const ConstantParams& p) { return p.a.dim(); }

    static Index validate(const FourierParams& p) {
        for (const auto& term : p.terms) {
            if (term.b.dim() != p.a.dim() || term.c.dim() != p.a.dim()) {
                throw UsageError("fourier term dimension mismatch");
            }
            if (!std::isfinite(term.omega)) {
                throw UsageError("fourier omega must be finite");
            }
        }
        return p.a.dim();
    }

    static Index validate(const FixedAxisParams& p) {
        if (!p.m0.allFinite() || !(p.m0.norm() > 0.0)) {
            throw UsageError("fixed_axis_qubit needs a nonzero finite m0");
        }
        if (!std::isfinite(p.alpha)) {
            throw UsageError("fixed_axis_qubit alpha must be finite");
        }
        return 2;
    }

    static Index validate(const RotatingFieldParams& p) {
        if (!std::isfinite(p.m0) || !std::isfinite(p.omega)) {
            throw UsageError("rotating_field_qubit parameters must be finite");
        }
        return 2;
    }

    static Index validate(const PiecewiseLinearParams& p) {
        if (p.knots.size() < 2) {
            throw UsageError("piecewise_linear needs at least two knots");
        }
        for (std::size_t k = 0; k < p.knots.size(); ++k) {
            if (!std::isfinite(p.knots[k].t)) {
                throw UsageError("knot times must be finite");
            }
            if (k > 0 && !(p.knots[k].t > p.knots[k - 1].t)) {
                throw UsageError("knot times must be strictly increasing");
            }
            if (p.knots[k].h.dim() != p.knots.front().h.dim()) {
                throw UsageError("knot dimension mismatch");
            }
        }
        return p.knots.front().h.dim();
    }

    static HermitianOperator eval(const ConstantParams& p, double) { return p.a; }

    static HermitianOperator eval(const FourierParams& p, double t) {
        Matrix m = p.a.matrix();
        for (const auto& term : p.terms) {
            m += std::cos(term.omega * t) * term.b.matrix() + std::sin(term.omega * t) * term.c.matrix();
        }
        return HermitianOperator(m);
    }

    static HermitianOperator eval(const FixedAxisParams& p, double t) {
        const double n = p.m0.norm();
        return pauli_dot((n + p.alpha * t) / n * p.m0);
    }

    static HermitianOperator eval(const RotatingFieldParams& p, double t) {
        return pauli_dot(Eigen::Vector3d(p.m0 * std::cos(p.omega * t), p.m0 * std::sin(p.omega * t), 0.0));
    }

    static HermitianOperator eval(const PiecewiseLinearParams& p, double t) {
        const std::size_t seg = segment(p, t);
        const Knot& a = p.knots[seg];
        const Knot& b = p.knots[seg + 1];
        const double w = (t - a.t) / (b.t - a.t);
        return HermitianOperator((1.0 - w) * a.h.matrix() + w * b.h.matrix());
    }

    static HermitianOperator eval_rate(const ConstantParams& p, double) { return HermitianOperator::zero(p.a.dim()); }

    static HermitianOperator eval_rate(const FourierParams& p, double t) {
        Matrix m = Matrix::Zero(p.a.dim(), p.a.dim());
        for (const auto& term : p.terms) {
            m += term.omega * (-std::sin(term.omega * t) * term.b.matrix() + std::cos(term.omega * t) * term.c.matrix());
        }
        return HermitianOperator(m);
    }

    static HermitianOperator eval_rate(const FixedAxisParams& p, double) {
        return pauli_dot(p.alpha / p.m0.norm() * p.m0);
    }

    static HermitianOperator eval_rate(const RotatingFieldParams& p, double t) {
        return pauli_dot(Eigen::Vector3d(-p.m0 * p.omega * std::sin(p.omega * t),
                                         p.m0 * p.omega * std::cos(p.omega * t), 0.0));
    }

    static HermitianOperator eval_rate(const PiecewiseLinearParams& p, double t) {
        for (const auto& knot : p.knots) {
            if (std::abs(t - knot.t) <= 1e-12 * std::max(1.0, std::abs(knot.t))) {
                throw DomainError("dH/dt undefined at piecewise_linear knot t=" + std::to_string(knot.t));
            }
        }
        const std::size_t seg = segment(p, t);
        const Knot& a = p.knots[seg];
        const Knot& b = p.knots[seg + 1];
        return HermitianOperator((b.h.matrix() - a.h.matrix()) / (b.t - a.t));
    }

    static std::size_t segment(const PiecewiseLinearParams& p, double t) {
        std::size_t seg = 0;
        while (seg + 2 < p.knots.size() && t >= p.knots[seg + 1].t) {
            ++seg;
        }
        return seg;
    }

    Params params_;
    double hbar_;
    Index dim_ = 0;
};

inline HermitianOperator eval_H(const HamiltonianSchedule& sched, double t) { return sched.H(t); }

inline HermitianOperator eval_Hdot(const HamiltonianSchedule& sched, double t) { return sched.Hdot(t); }

/// Central difference [H(t+h) - H(t-h)] / 2h. Test oracle only.
inline HermitianOperator fd_Hdot(const HamiltonianSchedule& sched, double t, double h) {
    if (!(h > 0.0)) {
        throw UsageError("fd_Hdot: step must be positive");
    }
    const auto [lo, hi] = sched.domain();
    if (t - h < lo || t + h > hi) {
        throw DomainError("fd_Hdot: stencil [t-h, t+h] leaves the schedule domain");
    }
    return HermitianOperator((sched.H(t + h).matrix() - sched.H(t - h).matrix()) / (2.0 * h));
}

// ---------------------------------------------------------------------------
// Uniform time grid

class TimeGrid {
public:
    TimeGrid(double t0, double t1, long steps) : t0_(t0), t1_(t1), steps_(steps) {
        if (!std::isfinite(t0) || !std::isfinite(t1) || !(t1 > t0)) {
            throw UsageError("time grid needs finite t1 > t0");
        }
        if (steps < 2) {
            throw UsageError("time grid needs at least 2 points");
        }
    }

    [[nodiscard]] double t0() const noexcept { return t0_; }
    [[nodiscard]] double t1() const noexcept { return t1_; }
    [[nodiscard]] long steps() const noexcept { return steps_; }
    [[nodiscard]] double dt() const noexcept { return (t1_ - t0_) / static_cast<double>(steps_ - 1); }

    [[nodiscard]] double at(long i) const {
        if (i == steps_ - 1) {
            return t1_;
        }
        return t0_ + static_cast<double>(i) * dt();
    }

private:
    double t0_;
    double t1_;
    long steps_;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline const json& require_key(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) {
        throw ConfigError(path, "expected an object");
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError(path + "." + key, "missing required field");
    }
    return *it;
}

inline Eigen::Vector3d vec3_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError(path, "expected [x, y, z]");
    }
    return {number_from_json(j[0], path + "[0]"), number_from_json(j[1], path + "[1]"),
            number_from_json(j[2], path + "[2]")};
}

} // namespace detail

inline TimeGrid grid_from_json(const json& j, const std::string& path) {
    const double t0 = number_from_json(detail::require_key(j, "t0", path), path + ".t0");
    const double t1 = number_from_json(detail::require_key(j, "t1", path), path + ".t1");
    const json& steps = detail::require_key(j, "steps", path);
    if (!steps.is_number_integer()) {
        throw ConfigError(path + ".steps", "expected an integer");
    }
    try {
        return TimeGrid(t0, t1, steps.get<long>());
    } catch (const UsageError& e) {
        throw ConfigError(path, e.what());
    }
}

inline json grid_to_json(const TimeGrid& g) { return {{"t0", g.t0()}, {"t1", g.t1()}, {"steps", g.steps()}}; }

/// Builds a schedule from a parsed document `{ "dim", "hbar"?, "schedule": {...} }`.
inline HamiltonianSchedule schedule_from_json(const json& doc) {
    const json& dim_j = detail::require_key(doc, "dim", "$");
    if (!dim_j.is_number_integer()) {
        throw ConfigError("$.dim", "expected an integer");
    }
    const long dim_l = dim_j.get<long>();
    if (dim_l < 2 || dim_l > 64) {
        throw ConfigError("$.dim", "dimension must lie in [2, 64]");
    }
    const auto dim = static_cast<Index>(dim_l);

    double hbar = 1.0;
    if (const auto it = doc.find("hbar"); it != doc.end()) {
        hbar = number_from_json(*it, "$.hbar");
        if (!(hbar > 0.0)) {
            throw ConfigError("$.hbar", "hbar must be positive");
        }
    }

    const std::string sp = "$.schedule";
    const json& s = detail::require_key(doc, "schedule", "$");
    const json& fam_j = detail::require_key(s, "family", sp);
    if (!fam_j.is_string()) {
        throw ConfigError(sp + ".family", "expected a string");
    }
    const auto family = family_from_name(fam_j.get<std::string>());
    if (!family) {
        throw ConfigError(sp + ".family", "unknown family '" + fam_j.get<std::string>() + "'");
    }
    if (is_qubit_family(*family) && dim != 2) {
        throw ConfigError("$.dim", "qubit families require dim 2");
    }

    auto herm = [&](const json& obj, const char* key, const std::string& path) {
        return hermitian_from_json(detail::require_key(obj, key, path), dim, path + "." + key);
    };

    switch (*family) {
    case Family::constant:
        return HamiltonianSchedule(ConstantParams{herm(s, "A", sp)}, hbar);
    case Family::fourier: {
        FourierParams p{herm(s, "A", sp), {}};
        if (const auto it = s.find("terms"); it != s.end()) {
            if (!it->is_array()) {
                throw ConfigError(sp + ".terms", "expected an array");
            }
            for (std::size_t k = 0; k < it->size(); ++k) {
                const std::string tp = sp + ".terms[" + std::to_string(k) + "]";
                const json& term = (*it)[k];
                p.terms.push_back(FourierTerm{herm(term, "B", tp), herm(term, "C", tp),
                                              number_from_json(detail::require_key(term, "omega", tp), tp + ".omega")});
            }
        }
        return HamiltonianSchedule(std::move(p), hbar);
    }
    case Family::fixed_axis_qubit: {
        const Eigen::Vector3d m0 = detail::vec3_from_json(detail::require_key(s, "m0", sp), sp + ".m0");
        if (!(m0.norm() > 0.0)) {
            throw ConfigError(sp + ".m0", "m0 must be nonzero to define the field axis");
        }
        const double alpha = number_from_json(detail::require_key(s, "alpha", sp), sp + ".alpha");
        return HamiltonianSchedule(FixedAxisParams{m0, alpha}, hbar);
    }
    case Family::rotating_field_qubit: {
        const json& m0_j = detail::require_key(s, "m0", sp);
        const double m0 = m0_j.is_array() ? detail::vec3_from_json(m0_j, sp + ".m0").norm()
                                          : number_from_json(m0_j, sp + ".m0");
        const double omega = number_from_json(detail::require_key(s, "omega", sp), sp + ".omega");
        return HamiltonianSchedule(RotatingFieldParams{m0, omega}, hbar);
    }
    case Family::piecewise_linear: {
        const json& knots = detail::require_key(s, "knots", sp);
        if (!knots.is_array() || knots.size() < 2) {
            throw ConfigError(sp + ".knots", "expected at least two knots");
        }
        PiecewiseLinearParams p;
        for (std::size_t k = 0; k < knots.size(); ++k) {
            const std::string kp = sp + ".knots[" + std::to_string(k) + "]";
            const double t = number_from_json(detail::require_key(knots[k], "t", kp), kp + ".t");
            if (k > 0 && !(t > p.knots.back().t)) {
                throw ConfigError(kp + ".t", "knot times must be strictly increasing");
            }
            p.knots.push_back(Knot{t, herm(knots[k], "H", kp)});
        }
        return HamiltonianSchedule(std::move(p), hbar);
    }
    }
    throw ConfigError(sp + ".family", "unhandled family");
}

inline HamiltonianSchedule parse_schedule(std::string_view config_text) {
    json doc;
    try {
        doc = json::parse(config_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("$", std::string("invalid JSON: ") + e.what());
    }
    return schedule_from_json(doc);
}

/// Inverse of schedule_from_json. Doubles are written in shortest round-trip form.
inline json schedule_to_json(const HamiltonianSchedule& sched) {
    json s;
    s["family"] = std::string(family_name(sched.family()));
    std::visit(
        [&s](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ConstantParams>) {
                s["A"] = matrix_to_json(p.a.matrix());
            } else if constexpr (std::is_same_v<P, FourierParams>) {
                s["A"] = matrix_to_json(p.a.matrix());
                json terms = json::array();
                for (const auto& term : p.terms) {
                    terms.push_back({{"B", matrix_to_json(term.b.matrix())},
                                     {"C", matrix_to_json(term.c.matrix())},
                                     {"omega", term.omega}});
                }
                s["terms"] = std::move(terms);
            } else if constexpr (std::is_same_v<P, FixedAxisParams>) {
                s["m0"] = {p.m0.x(), p.m0.y(), p.m0.z()};
                s["alpha"] = p.alpha;
            } else if constexpr (std::is_same_v<P, RotatingFieldParams>) {
                s["m0"] = p.m0;
                s["omega"] = p.omega;
            } else {
                json knots = json::array();
                for (const auto& knot : p.knots) {
                    knots.push_back({{"t", knot.t}, {"H", matrix_to_json(knot.h.matrix())}});
                }
                s["knots"] = std::move(knots);
            }
        },
        sched.params());
    return {{"dim", sched.dim()}, {"hbar", sched.hbar()}, {"schedule", std::move(s)}};
}

inline std::string serialize_schedule(const HamiltonianSchedule& sched) { return schedule_to_json(sched).dump(); }

} // namespace qgeom
