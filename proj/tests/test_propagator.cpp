#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "qgeom/propagator.hpp"

using namespace qgeom;

namespace {

HamiltonianSchedule sample_fourier() {
    SeededRng rng(4);
    auto a = random_hermitian(3, 0.7, rng);
    auto b = random_hermitian(3, 0.7, rng);
    auto c = random_hermitian(3, 0.7, rng);
    return HamiltonianSchedule(FourierParams{std::move(a), {FourierTerm{std::move(b), std::move(c), 2.0}}});
}

/// Reference solution by RK4 on the amplitudes with a much finer step.
Vector rk4_reference(const HamiltonianSchedule& s, const PureState& psi0, double t1, long steps) {
    Vector y = psi0.amplitudes();
    const double dt = t1 / static_cast<double>(steps);
    auto f = [&](double t, const Vector& v) -> Vector { return Complex(0, -1) * (s.H(t).matrix() * v); };
    for (long i = 0; i < steps; ++i) {
        const double t = i * dt;
        const Vector k1 = f(t, y);
        const Vector k2 = f(t + dt / 2, y + dt / 2 * k1);
        const Vector k3 = f(t + dt / 2, y + dt / 2 * k2);
        const Vector k4 = f(t + dt, y + dt * k3);
        y += dt / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

double state_distance(const Vector& a, const Vector& b) {
    // global phase is physical here: both start from the same state and use the same H
    return (a - b).norm();
}

} // namespace

TEST_CASE("eigenstate of a constant Hamiltonian only acquires a phase") {
    const auto s = HamiltonianSchedule::constant(pauli_z());
    const auto traj = propagate(s, PureState::basis(2, 0), TimeGrid(0.0, 3.0, 301));
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const double t = traj.time(static_cast<long>(i));
        CHECK(std::abs(traj.states[i][0]) == Catch::Approx(1.0).margin(1e-10));
        CHECK(std::abs(traj.states[i][0] - std::polar(1.0, -t)) < 1e-10);
    }
}

TEST_CASE("constant Hamiltonians conserve energy") {
    SeededRng rng(8);
    const auto s = HamiltonianSchedule::constant(random_hermitian(4, 1.0, rng));
    const auto traj = propagate(s, random_state(4, rng), TimeGrid(0.0, 5.0, 501));
    CHECK(constant_H_energy_drift(traj) < 1e-10);
    CHECK(traj.max_norm_defect < 1e-12);
    CHECK_THROWS_AS(constant_H_energy_drift(propagate(sample_fourier(), PureState::basis(3, 0), TimeGrid(0, 1, 11))),
                    UsageError);
}

TEST_CASE("midpoint propagation converges at second order") {
    const auto s = sample_fourier();
    const auto psi0 = PureState::basis(3, 1);
    const Vector ref = rk4_reference(s, psi0, 1.0, 20000);
    std::vector<double> errs;
    for (long steps : {251, 501, 1001}) {
        errs.push_back(state_distance(propagate(s, psi0, TimeGrid(0.0, 1.0, steps)).states.back().amplitudes(), ref));
    }
    const double p1 = std::log2(errs[0] / errs[1]);
    const double p2 = std::log2(errs[1] / errs[2]);
    CHECK(p1 >= 1.9);
    CHECK(p2 >= 1.9);
}

TEST_CASE("hbar rescales the evolution") {
    const auto s1 = HamiltonianSchedule::constant(pauli_x(), 1.0);
    const auto s2 = HamiltonianSchedule::constant(2.0 * pauli_x(), 2.0);
    const auto psi0 = PureState::basis(2, 0);
    const auto a = propagate(s1, psi0, TimeGrid(0, 1, 101)).states.back().amplitudes();
    const auto b = propagate(s2, psi0, TimeGrid(0, 1, 101)).states.back().amplitudes();
    CHECK((a - b).norm() < 1e-12);
    const double t = 1.0;
    CHECK(std::abs(a[0] - Complex(std::cos(t), 0)) < 1e-12);
    CHECK(std::abs(a[1] - Complex(0, -std::sin(t))) < 1e-12);
}

TEST_CASE("coarse grids warn but still propagate") {
    const auto s = HamiltonianSchedule::constant(10.0 * pauli_z());
    const auto traj = propagate(s, PureState::basis(2, 0), TimeGrid(0, 10, 11));
    CHECK_FALSE(traj.warnings.empty());
    CHECK(traj.states.size() == 11);
    CHECK_THROWS_AS(propagate(s, PureState::basis(3, 0), TimeGrid(0, 1, 11)), UsageError);
}
