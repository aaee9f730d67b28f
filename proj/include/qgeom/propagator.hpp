#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "schedule.hpp"

namespace qgeom {

/// States of a propagated evolution on a uniform grid.
struct Trajectory {
    HamiltonianSchedule schedule;
    TimeGrid grid;
    std::vector<PureState> states;
    /// Largest | ||U psi|| - 1 | seen before per-step renormalization.
    double max_norm_defect = 0.0;
    std::vector<std::string> warnings;

    [[nodiscard]] double time(long i) const { return grid.at(i); }
    [[nodiscard]] double hbar() const noexcept { return schedule.hbar(); }
};

/// Midpoint exponential (second-order Magnus) propagation:
/// psi(t+dt) = exp(-i H(t+dt/2) dt / hbar) psi(t), renormalized each step.
inline Trajectory propagate(const HamiltonianSchedule& sched, const PureState& psi0, const TimeGrid& grid) {
    if (sched.dim() != psi0.dim()) {
        throw UsageError("propagate: schedule dim " + std::to_string(sched.dim()) + " vs state dim " +
                         std::to_string(psi0.dim()));
    }
    Trajectory traj{sched, grid, {}, 0.0, {}};
    traj.states.reserve(static_cast<std::size_t>(grid.steps()));
    traj.states.push_back(psi0);

    const double dt = grid.dt();
    const double hbar = sched.hbar();
    double worst_step_norm = 0.0;
    for (long i = 0; i + 1 < grid.steps(); ++i) {
        const double t_mid = grid.at(i) + 0.5 * dt;
        const HermitianOperator h_mid = sched.H(t_mid);
        worst_step_norm = std::max(worst_step_norm, h_mid.inf_norm() * dt / hbar);
        const Vector next = apply(unitary_of(h_mid, dt, hbar), traj.states.back());
        traj.max_norm_defect = std::max(traj.max_norm_defect, std::abs(next.norm() - 1.0));
        traj.states.emplace_back(next);
    }
    if (worst_step_norm >= 1.0) {
        traj.warnings.push_back("coarse grid: ||H|| dt / hbar reached " + std::to_string(worst_step_norm));
    }
    return traj;
}

/// max_t |<H>(t) - <H>(0)| for a constant schedule.
inline double constant_H_energy_drift(const Trajectory& traj) {
    if (traj.schedule.family() != Family::constant) {
        throw UsageError("constant_H_energy_drift requires a constant schedule");
    }
    const HermitianOperator h = traj.schedule.H(traj.grid.t0());
    const double e0 = expectation(h, traj.states.front());
    double drift = 0.0;
    for (const auto& psi : traj.states) {
        drift = std::max(drift, std::abs(expectation(h, psi) - e0));
    }
    return drift;
}

} // namespace qgeom
