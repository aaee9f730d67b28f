// Fixed-axis field m(t) = (1 + t/2) z with the Bloch vector in the x-y plane:
// the acceleration sits exactly on its upper bound sigma_Hdot = |mdot|.

#include <cstdio>

#include "qgeom/qgeom.hpp"

int main() {
    using namespace qgeom;
    const HamiltonianSchedule sched(FixedAxisParams{Vec3(0, 0, 1), 0.5});
    const TimeGrid grid(0.0, 2.0, 2001);
    const Trajectory traj = propagate(sched, state_from_bloch(BlochVector(1, 0, 0)), grid);
    const auto samples = sample_trajectory(traj);

    std::printf("%8s %10s %10s %10s %12s\n", "t", "v_H", "a_H", "sigma_Hdot", "slack");
    for (std::size_t i = 0; i < samples.size(); i += 250) {
        const auto& s = samples[i];
        std::printf("%8.3f %10.6f %10.6f %10.6f %12.3e\n", s.t, s.v_H, s.a_H_analytic.value_or(0.0), s.sigma_Hdot,
                    s.main_slack);
    }
    std::printf("arc length s(2) = %.9f\n", samples.back().s_arc);
}
