#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "qgeom/geometry.hpp"

using namespace qgeom;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

/// Qubit state with Bloch vector (x, y, z), built from spherical angles.
PureState bloch(double x, double y, double z) {
    const double n = std::sqrt(x * x + y * y + z * z);
    const double theta = std::acos(z / n);
    const double phi = std::atan2(y, x);
    Vector v(2);
    v << std::cos(theta / 2), std::polar(std::sin(theta / 2), phi);
    return PureState(v);
}

HamiltonianSchedule fourier(Index dim, std::uint64_t seed, double scale = 1.0) {
    SeededRng rng(seed);
    auto a = random_hermitian(dim, scale, rng);
    auto b = random_hermitian(dim, scale, rng);
    auto c = random_hermitian(dim, scale, rng);
    return HamiltonianSchedule(FourierParams{std::move(a), {FourierTerm{std::move(b), std::move(c), 1.7}}});
}

/// Delta h at one instant, from the definition.
Matrix delta_h_direct(const Matrix& h, const Vector& psi) {
    const Index n = h.rows();
    const double mean = (psi.adjoint() * h * psi)(0).real();
    const Matrix dh = h - mean * Matrix::Identity(n, n);
    const double sigma = (dh * psi).norm();
    return dh / sigma;
}

Complex expval(const Matrix& a, const Vector& psi) { return (psi.adjoint() * a * psi)(0); }

} // namespace

TEST_CASE("speed and spread of Hdot on the documented examples") {
    const double r = 1.0 / std::sqrt(2.0);
    Vector plus(2);
    plus << r, r;
    CHECK(speed_vH(pauli_z(), PureState(plus)) == Approx(1.0).margin(1e-14));
    CHECK(speed_vH(pauli_z(), PureState::basis(2, 0)) == 0.0);
    CHECK(speed_vH(pauli_dot({0, 0, 2}), bloch(1, 0, 0)) == Approx(2.0).margin(1e-14));
    CHECK(speed_vH(pauli_z(), PureState(plus), 2.0) == Approx(0.5).margin(1e-14));

    CHECK(sigma_Hdot(HermitianOperator::zero(2), bloch(1, 0, 0)) == 0.0);
    CHECK(sigma_Hdot(0.5 * pauli_z(), bloch(1, 0, 0)) == Approx(0.5).margin(1e-14));
    CHECK(sigma_Hdot(pauli_x(), PureState(plus)) == Approx(0.0).margin(1e-14));
}

TEST_CASE("analytic acceleration: closed forms and finite differences") {
    SeededRng rng(1);
    const auto psi = random_state(3, rng);
    CHECK(accel_aH_analytic(random_hermitian(3, 1.0, rng), HermitianOperator::zero(3), psi) == Approx(0.0).margin(1e-14));
    CHECK(accel_aH_analytic(pauli_z(), 0.5 * pauli_z(), bloch(1, 0, 0)) == Approx(0.5).margin(1e-14));
    CHECK_THROWS_AS(accel_aH_analytic(pauli_z(), pauli_x(), PureState::basis(2, 0)), DegenerateStateError);

    const auto s = fourier(3, 7);
    const auto psi0 = random_state(3, rng);
    const auto traj = propagate(s, psi0, TimeGrid(0.0, 1.0, 1001));
    for (long i : {1L, 250L, 500L, 999L}) {
        const double t = traj.time(i);
        const double an = accel_aH_analytic(s.H(t), s.Hdot(t), traj.states[static_cast<std::size_t>(i)]);
        CHECK(std::abs(accel_aH_fd(traj, i) - an) <= 5e-6);
    }
    CHECK_THROWS_AS(accel_aH_fd(traj, 0), UsageError);
    CHECK_THROWS_AS(accel_aH_fd(traj, 1000), UsageError);

    const auto c = propagate(HamiltonianSchedule::constant(pauli_x()), bloch(0.3, 0.1, 0.9), TimeGrid(0, 1, 101));
    CHECK(std::abs(accel_aH_fd(c, 50)) < 1e-10);
}

TEST_CASE("finite-difference acceleration error falls at second order") {
    const auto s = fourier(3, 13);
    SeededRng rng(2);
    const auto psi0 = random_state(3, rng);
    // t = 0.25 lies on every grid: dt = 1e-2, 5e-3, 2.5e-3
    std::vector<double> devs;
    for (long steps : {51L, 101L, 201L}) {
        const auto traj = propagate(s, psi0, TimeGrid(0.0, 0.5, steps));
        const long i = (steps - 1) / 2;
        const double t = traj.time(i);
        const auto& st = traj.states[static_cast<std::size_t>(i)];
        devs.push_back(std::abs(accel_aH_fd(traj, i) - accel_aH_analytic(s.H(t), s.Hdot(t), st)));
    }
    CHECK(devs[0] / devs[1] >= 3.6);
    CHECK(devs[1] / devs[2] >= 3.6);
}

TEST_CASE("arc length by trapezoid") {
    std::vector<GeometrySample> ones(101), ramp(101);
    for (int k = 0; k <= 100; ++k) {
        ones[k].t = ramp[k].t = k / 100.0;
        ones[k].v_H = 1.0;
        ramp[k].v_H = k / 100.0;
    }
    CHECK(arc_length(ones).back() == Approx(1.0).margin(1e-12));
    CHECK(arc_length(ramp).back() == Approx(0.5).margin(1e-6));
    CHECK(arc_length(ones).front() == 0.0);
    std::swap(ones[3], ones[4]);
    CHECK_THROWS_AS(arc_length(ones), UsageError);
}

TEST_CASE("stationary curvature closed forms") {
    // qubit: 4 (a.m)^2 / (m^2 - (a.m)^2)
    CHECK(curvature_LT(pauli_z(), bloch(1, 0, 0)) == Approx(0.0).margin(1e-12));
    const double th = kPi / 4;
    CHECK(curvature_LT(pauli_z(), bloch(std::sin(th), 0, std::cos(th))) == Approx(4.0).epsilon(1e-12));
    SeededRng rng(3);
    for (int k = 0; k < 20; ++k) {
        const Eigen::Vector3d m(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d a = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
        const double am = a.dot(m);
        const double closed = 4 * am * am / (m.squaredNorm() - am * am);
        CHECK(curvature_LT(pauli_dot(m), bloch(a.x(), a.y(), a.z())) == Approx(closed).epsilon(1e-9).margin(1e-12));
    }
    // <(Dh)^2> = 1
    const auto h = random_hermitian(5, 1.0, rng);
    const auto psi = random_state(5, rng);
    const auto k = local_kinematics(h, HermitianOperator::zero(5), psi, 1.0);
    CHECK(expectation(delta_h(k).squared(), psi) == Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(curvature_LT(pauli_z(), PureState::basis(2, 1)), DegenerateStateError);
}

TEST_CASE("nonstationary curvature reductions") {
    SeededRng rng(4);
    const auto h = random_hermitian(4, 1.0, rng);
    const auto psi = random_state(4, rng);
    CHECK(std::abs(curvature_AC(h, HermitianOperator::zero(4), psi) - curvature_LT(h, psi)) <= 1e-9);
    // fixed axis, a perpendicular to m, mdot parallel to m
    CHECK(std::abs(curvature_AC(1.3 * pauli_z(), 0.5 * pauli_z(), bloch(0.6, 0.8, 0))) <= 1e-8);
}

TEST_CASE("nonstationary curvature agrees with a finite-difference operator oracle") {
    const auto s = fourier(3, 21, 0.8);
    SeededRng rng(5);
    const auto psi_start = random_state(3, rng);
    const double t = 0.6, delta = 1e-3;
    // fine propagation across [t - 2 delta, t + 2 delta]; point 200 is t
    const auto traj = propagate(s, psi_start, TimeGrid(t - 2 * delta, t + 2 * delta, 401));
    const double tm = traj.time(200);
    const Vector& mid = traj.states[200].amplitudes();
    auto dh_at = [&](long i) {
        return delta_h_direct(s.H(traj.time(i)).matrix(), traj.states[static_cast<std::size_t>(i)].amplitudes());
    };

    const Matrix dh = delta_h_direct(s.H(tm).matrix(), mid);
    const double v = (s.H(tm).matrix() * mid - expval(s.H(tm).matrix(), mid) * mid).norm();
    // fourth-order central difference
    const Matrix ddh = (-dh_at(400) + 8.0 * dh_at(300) - 8.0 * dh_at(100) + dh_at(0)) / (12 * delta);
    const Matrix dhp = ddh / v;
    const Matrix dh2 = dh * dh;
    const Complex oracle = expval(dh2 * dh2, mid) - std::pow(expval(dh2, mid), 2) + expval(dhp * dhp, mid) -
                           std::pow(expval(dhp, mid), 2) + Complex(0, 1) * expval(dh2 * dhp - dhp * dh2, mid);

    const double value = curvature_AC(s.H(tm), s.Hdot(tm), traj.states[200]);
    const auto sum = curvature_AC_sum(local_kinematics(s.H(tm), s.Hdot(tm), traj.states[200], 1.0), traj.states[200]);
    CHECK(std::abs(sum.value.imag()) <= 1e-8);
    CHECK(std::abs(value - oracle.real()) <= 1e-7);
}

TEST_CASE("Dh' identities") {
    // stationary
    SeededRng rng(6);
    const auto h = random_hermitian(3, 1.0, rng);
    const auto psi = random_state(3, rng);
    const auto [l0, r0] = delta_h_prime_sq_identity(h, HermitianOperator::zero(3), psi);
    CHECK(std::abs(l0) < 1e-14);
    CHECK(std::abs(r0) < 1e-14);
    // saturating qubit
    const auto [l1, r1] = delta_h_prime_sq_identity(pauli_z(), 0.5 * pauli_z(), bloch(1, 0, 0));
    CHECK(std::abs(l1) < 1e-12);
    CHECK(std::abs(r1) < 1e-12);
    // random qubit fourier samples; <Dh'> = 0
    for (int k = 0; k < 20; ++k) {
        const auto s = fourier(2, 100 + k);
        const auto st = random_state(2, rng);
        const double t = rng.uniform(0, 3);
        const auto [l, r] = delta_h_prime_sq_identity(s.H(t), s.Hdot(t), st);
        CHECK(std::abs(l - r) <= 1e-8 * std::max(1.0, std::abs(r)));
        const auto kin = local_kinematics(s.H(t), s.Hdot(t), st, 1.0);
        CHECK(std::abs(expectation(delta_h_prime(kin), st)) <= 1e-8);
    }
}

TEST_CASE("main bound slack examples and random property") {
    SeededRng rng(7);
    CHECK(main_bound_slack(pauli_x(), HermitianOperator::zero(2), random_state(2, rng)) == 0.0);
    CHECK(main_bound_slack(pauli_z(), 0.5 * pauli_z(), bloch(1, 0, 0)) == Approx(0.0).margin(1e-14));
    // rotating field at t=0: m = x, mdot = 2y, a = z
    CHECK(main_bound_slack(pauli_x(), 2.0 * pauli_y(), PureState::basis(2, 0)) == Approx(4.0).margin(1e-12));
    // degenerate: rate taken as 0
    CHECK(main_bound_slack(pauli_z(), pauli_x(), PureState::basis(2, 0)) == Approx(1.0).margin(1e-14));

    for (int k = 0; k < 500; ++k) {
        const Index dim = 2 + k % 7;
        const auto h = random_hermitian(dim, 1.0, rng);
        const auto hd = random_hermitian(dim, 1.0, rng);
        const auto psi = random_state(dim, rng);
        CHECK(main_bound_slack(h, hd, psi) >= -1e-9);
    }
}

TEST_CASE("proof chain identities hold on random inputs") {
    SeededRng rng(8);
    for (int k = 0; k < 200; ++k) {
        const Index dim = 2 + k % 6;
        const auto h = random_hermitian(dim, 1.0, rng);
        const auto hd = random_hermitian(dim, 1.0, rng);
        const auto psi = random_state(dim, rng);
        const auto kin = local_kinematics(h, hd, psi, 1.0);
        const auto pc = proof_chain(kin, h, hd, psi);
        CHECK(pc.schwarz_slack >= -1e-10);
        CHECK(pc.decomposition_residual <= 1e-9);
        CHECK(pc.commutator_real <= 1e-10);
        CHECK(pc.anticommutator_imag <= 1e-10);
        CHECK(pc.uncertainty_slack >= -1e-10);
    }
}

TEST_CASE("variance derivative equals the anticommutator along a trajectory") {
    const auto s = fourier(4, 31, 0.5);
    SeededRng rng(9);
    const auto traj = propagate(s, random_state(4, rng), TimeGrid(0.0, 1.0, 1001));
    const double dt = traj.grid.dt();
    for (long i = 1; i < 1000; i += 37) {
        const auto idx = static_cast<std::size_t>(i);
        const double fd = (variance(s.H(traj.time(i + 1)), traj.states[idx + 1]) -
                           variance(s.H(traj.time(i - 1)), traj.states[idx - 1])) / (2 * dt);
        const auto kin = local_kinematics(s.H(traj.time(i)), s.Hdot(traj.time(i)), traj.states[idx], 1.0);
        CHECK(std::abs(fd - kin.anticommutator) <= 5 * dt * dt);
    }
}

TEST_CASE("quantum speed limit times") {
    auto q = qsl_times(1, 1);
    CHECK(q.mandelstam_tamm == Approx(kPi / 2));
    CHECK(q.margolus_levitin == Approx(kPi / 2));
    CHECK(q.tau_qsl == Approx(kPi / 2));
    q = qsl_times(2, 1);
    CHECK(q.tau_qsl == Approx(kPi / 2));
    CHECK(q.tau_qsl == q.margolus_levitin);
    q = qsl_times(1, 3);
    CHECK(q.tau_qsl == Approx(kPi / 2));
    CHECK(q.tau_qsl == q.mandelstam_tamm);
    CHECK_THROWS_AS(qsl_times(0, 1), UsageError);
    CHECK_THROWS_AS(qsl_times(1, -1), UsageError);
}

TEST_CASE("maximal acceleration bounds for the electron") {
    // CODATA 2018 values typed independently of the library.
    const double me = 9.1093837015e-31, c = 299792458.0, hbar = 1.054571817e-34;
    const double oracle = 2.0 * me * std::pow(c, 3) / hbar;
    auto p = ParticleParams::electron();
    const auto b = caianiello_bounds(p);
    CHECK(std::abs(b.a_max_1984 - oracle) / oracle <= 1e-6);
    CHECK(b.a_max_1984 == Approx(4.655e29).epsilon(1e-3));
    CHECK_FALSE(b.a_max_1981.has_value());
    CHECK_FALSE(b.a_max_from_dx.has_value());

    p.delta_x = 0.5 * hbar / (me * c);
    const auto bx = caianiello_bounds(p);
    CHECK(std::abs(*bx.a_max_from_dx - bx.a_max_1984) / bx.a_max_1984 <= 4 * std::numeric_limits<double>::epsilon());
    const double p_oracle = 2.0 * me * me * std::pow(c, 4) / hbar;
    CHECK(std::abs(*bx.p_max - p_oracle) / p_oracle <= 1e-12);
    CHECK(*bx.p_max == Approx(1.27e8).epsilon(5e-3));

    p.mu = 2 * me;
    p.lambda = 1e-15;
    CHECK(*caianiello_bounds(p).a_max_1981 == Approx(2.0 * c * c / 1e-15));
    p.lambda = -1.0;
    CHECK_THROWS_AS(caianiello_bounds(p), UsageError);
}

TEST_CASE("time-dependent maximal acceleration and jerk") {
    const auto e = ParticleParams::electron();
    CHECK(pati_acceleration_and_jerk(0.0, 0.0, e).a_max_t == 0.0);
    CHECK(pati_acceleration_and_jerk(1.0, 0.0, e).a_max_t == Approx(5.99584916e8));
    ParticleParams natural{1.0, 299792458.0, 1.0, {}, {}, {}};
    CHECK(pati_acceleration_and_jerk(1.0, 0.5, natural).jerk_bound == Approx(299792458.0));
    CHECK_THROWS_AS(pati_acceleration_and_jerk(-1.0, 0.0, e), UsageError);
}

TEST_CASE("sample_trajectory on the documented configurations") {
    const double r = 1.0 / std::sqrt(2.0);
    Vector plus(2);
    plus << r, r;
    const auto c = sample_trajectory(propagate(HamiltonianSchedule::constant(pauli_z()), PureState(plus), TimeGrid(0, 2, 201)));
    for (const auto& s : c) {
        CHECK(s.v_H == Approx(1.0).margin(1e-12));
        CHECK(*s.a_H_analytic == Approx(0.0).margin(1e-12));
        CHECK(s.main_slack == Approx(0.0).margin(1e-12));
        CHECK(*s.kappa_LT_sq == Approx(0.0).margin(1e-10));
        CHECK(*s.kappa_AC_sq == Approx(0.0).margin(1e-10));
    }
    CHECK_FALSE(c.front().a_H_fd.has_value());
    CHECK_FALSE(c.back().a_H_fd.has_value());

    const auto d = sample_trajectory(propagate(HamiltonianSchedule::constant(pauli_z()), PureState::basis(2, 0), TimeGrid(0, 1, 11)));
    for (const auto& s : d) {
        CHECK(s.degenerate);
        CHECK_FALSE(s.a_H_analytic.has_value());
        CHECK_FALSE(s.kappa_LT_sq.has_value());
        CHECK_FALSE(s.kappa_AC_sq.has_value());
    }

    const HamiltonianSchedule fa(FixedAxisParams{Eigen::Vector3d(0, 0, 1), 0.5});
    const auto f = sample_trajectory(propagate(fa, bloch(1, 0, 0), TimeGrid(0, 2, 2001)));
    CHECK(f.back().v_H == Approx(2.0).margin(1e-6));
    for (const auto& s : f) {
        CHECK(std::abs(*s.a_H_analytic - 0.5) <= 1e-6);
    }
    CHECK(f.back().s_arc == Approx(3.0).margin(1e-5));
}

TEST_CASE("geometry CSV contract") {
    GeometrySample s;
    s.t = 0.1;
    s.v_H = 1.0;
    s.a_H_analytic = -0.25;
    s.degenerate = false;
    CHECK(std::string(kGeometryCsvHeader) ==
          "t,s,exp_H,sigma_H,v_H,a_H_analytic,a_H_fd,sigma_Hdot,main_slack,kappa_LT_sq,kappa_AC_sq,degenerate");
    CHECK(geometry_csv_row(s) == "0.1,0,0,0,1,-0.25,,0,0,,,false");
    std::ostringstream out;
    write_geometry_csv(out, {s});
    CHECK(out.str() == std::string(kGeometryCsvHeader) + "\n0.1,0,0,0,1,-0.25,,0,0,,,false\n");
    // shortest round trip
    const double x = 0.1 + 0.2;
    CHECK(std::stod(format_real(x)) == x);
}
