#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "mollikit/objective.hpp"
#include "mollikit/riccati.hpp"

using namespace mollikit;
using namespace mollikit::riccati;

namespace {

LinearModel scalar_model(double a, double b) {
    LinearModel m;
    m.A = Eigen::MatrixXd::Constant(1, 1, a);
    m.B = Eigen::MatrixXd::Constant(1, 1, b);
    m.s_star = Eigen::VectorXd::Zero(1);
    m.u_star = Eigen::VectorXd::Zero(1);
    m.dt = 1.0;
    return m;
}

LqrWeights scalar_weights(double q, double r) {
    LqrWeights w;
    w.Q = Eigen::MatrixXd::Constant(1, 1, q);
    w.R = Eigen::MatrixXd::Constant(1, 1, r);
    return w;
}

}  // namespace

TEST_CASE("scalar DARE golden case: P solves P^2 - P - 1 = 0") {
    const DareSolution sol = dare_solve(scalar_model(1, 1), scalar_weights(1, 1), 1.0);
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    CHECK(std::abs(sol.P(0, 0) - golden) < 1e-9);
    CHECK(std::abs(sol.K(0, 0) - golden / (1.0 + golden)) < 1e-9);
    CHECK(sol.residual < 1e-12);
}

TEST_CASE("no dynamics means P = q and zero gain") {
    const DareSolution sol = dare_solve(scalar_model(0, 1), scalar_weights(3, 1), 0.99);
    CHECK(sol.P(0, 0) == Catch::Approx(3.0).margin(1e-12));
    CHECK(std::abs(sol.K(0, 0)) < 1e-12);
}

TEST_CASE("uncontrollable unstable pair hits the iteration cap") {
    CHECK_THROWS_WITH(dare_solve(scalar_model(2, 0), scalar_weights(1, 1), 1.0),
                      Catch::Matchers::ContainsSubstring("dare_solve"));
}

TEST_CASE("double integrator discretizes to the closed-form ZOH model") {
    Eigen::MatrixXd a_c(2, 2), b_c(2, 1);
    a_c << 0, 1, 0, 0;
    b_c << 0, 1;
    Eigen::MatrixXd a_d, b_d;
    const double dt = 0.05;
    discretize(a_c, b_c, dt, a_d, b_d);
    CHECK(a_d(0, 0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(a_d(0, 1) == Catch::Approx(dt).margin(1e-15));
    CHECK(a_d(1, 0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(a_d(1, 1) == Catch::Approx(1.0).margin(1e-15));
    CHECK(b_d(0, 0) == Catch::Approx(dt * dt / 2.0).margin(1e-15));
    CHECK(b_d(1, 0) == Catch::Approx(dt).margin(1e-15));
}

TEST_CASE("quadrotor linearization matches the analytic Jacobian at hover") {
    const auto sp = sysdyn::planar_quadrotor_spec();
    const sysdyn::StateVector s_star(6, 0.0);
    const sysdyn::ControlVector u_star = {4.905, 4.905};
    const LinearModel model = linearize(sp, s_star, u_star);

    // analytic continuous-time entries, discretized for comparison
    Eigen::MatrixXd a_c = Eigen::MatrixXd::Zero(6, 6), b_c = Eigen::MatrixXd::Zero(6, 2);
    a_c(0, 1) = 1.0;
    a_c(1, 4) = -9.81;  // x2' = -(u1+u2) cos(th) |_{th=0} * th / m
    a_c(2, 3) = 1.0;
    a_c(4, 5) = 1.0;
    b_c(3, 0) = b_c(3, 1) = 1.0;
    b_c(5, 0) = 5.0;
    b_c(5, 1) = -5.0;
    Eigen::MatrixXd a_d, b_d;
    discretize(a_c, b_c, sp.dt, a_d, b_d);
    CHECK((model.A - a_d).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((model.B - b_d).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("pendulum linearization matches the hand-differentiated gravity block") {
    const auto sp = sysdyn::double_pendulum_spec();
    const LinearModel model = linearize(sp, {0, 0, 0, 0}, {0, 0});

    // tau Jacobian at the origin, by hand
    const double g11 = -(sp.mass1 * sp.gravity * sp.com1 +
                         sp.mass2 * sp.gravity * (sp.len1 + sp.com2));
    const double g12 = -sp.mass2 * sp.gravity * sp.com2;
    const double g22 = -sp.mass2 * sp.gravity * sp.com2;
    Eigen::Matrix2d grav;
    grav << g11, g12, g12, g22;
    Eigen::Matrix2d mass;
    mass << 0.275, 0.11875, 0.11875, 0.1;
    const Eigen::Matrix2d accel = mass.inverse() * grav;

    Eigen::MatrixXd a_c = Eigen::MatrixXd::Zero(4, 4), b_c = Eigen::MatrixXd::Zero(4, 2);
    a_c(0, 2) = a_c(1, 3) = 1.0;
    a_c.block<2, 2>(2, 0) = accel;
    b_c.block<2, 2>(2, 0) = mass.inverse();
    Eigen::MatrixXd a_d, b_d;
    discretize(a_c, b_c, sp.dt, a_d, b_d);
    CHECK((model.A - a_d).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((model.B - b_d).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("linearize rejects non-equilibrium points") {
    const auto sp = sysdyn::planar_quadrotor_spec();
    CHECK_THROWS_WITH(linearize(sp, sysdyn::StateVector(6, 0.0), {5.5, 5.5}),
                      Catch::Matchers::ContainsSubstring("equilibrium"));
}

TEST_CASE("quadrotor DARE gain stabilizes the discrete loop and the nonlinear plant") {
    const auto sp = sysdyn::planar_quadrotor_spec();
    const sysdyn::StateVector s_star(6, 0.0);
    const sysdyn::ControlVector u_star = {4.905, 4.905};
    const LinearModel model = linearize(sp, s_star, u_star);
    const DareSolution sol = dare_solve(model, reward_weights(sp.kind), 0.99);

    CHECK(sol.residual < 1e-10);

    // P symmetric positive semidefinite
    CHECK((sol.P - sol.P.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.P);
    CHECK(es.eigenvalues().minCoeff() > -1e-9);

    // spectral radius below one, power iteration agrees with the eigensolver
    const Eigen::MatrixXd acl = model.A - model.B * sol.K;
    const double rho_pi = spectral_radius(acl);
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(acl).eigenvalues();
    double rho_eig = 0.0;
    for (int i = 0; i < eig.size(); ++i) rho_eig = std::max(rho_eig, std::abs(eig[i]));
    CHECK(rho_pi < 1.0);
    CHECK(std::abs(rho_pi - rho_eig) < 1e-3);

    // the nonlinear quadrotor under u = -K s + b0 returns to hover from a
    // 0.05-perturbed initial state
    const auto gain = lqr_policy(sp, model, sol);
    sysdyn::StateVector s(6, 0.05 / std::sqrt(6.0));
    for (int k = 0; k < 1000; ++k) {
        const auto u = sysdyn::saturate(policy::mean_action(gain, s), sp);
        s = sysdyn::integrate_step(sp, s, u);
    }
    double norm = 0.0;
    for (double v : s) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("pendulum DARE gain stabilizes the origin of the nonlinear plant") {
    const auto sp = sysdyn::double_pendulum_spec();
    const LinearModel model = linearize(sp, {0, 0, 0, 0}, {0, 0});
    const DareSolution sol = dare_solve(model, reward_weights(sp.kind), 0.99);
    CHECK(spectral_radius(model.A - model.B * sol.K) < 1.0);

    const auto gain = lqr_policy(sp, model, sol);
    sysdyn::StateVector s = {-0.2, 0.2, 0.0, 0.0};
    for (int k = 0; k < 2000; ++k) {
        const auto u = sysdyn::saturate(policy::mean_action(gain, s), sp);
        s = sysdyn::integrate_step(sp, s, u);
    }
    double norm = 0.0;
    for (double v : s) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("lqr_policy emits the gain in checkpoint form with the hover bias") {
    const auto sp = sysdyn::planar_quadrotor_spec();
    const LinearModel model = linearize(sp, sysdyn::StateVector(6, 0.0), {4.905, 4.905});
    const DareSolution sol = dare_solve(model, reward_weights(sp.kind), 0.99);
    const auto gain = lqr_policy(sp, model, sol);
    const auto round_trip = policy::parse_checkpoint(policy::checkpoint_string(gain));
    CHECK(round_trip.mean.gain == gain.mean.gain);
    CHECK(round_trip.mean.bias == std::vector<double>{4.905, 4.905});
}
