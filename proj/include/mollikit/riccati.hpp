#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mollikit/policy.hpp"
#include "mollikit/rng.hpp"
#include "mollikit/sysdyn.hpp"

namespace mollikit::riccati {

using sysdyn::ControlVector;
using sysdyn::StateVector;
using sysdyn::SystemKind;
using sysdyn::SystemSpec;

/// Discrete-time linear model around an equilibrium, per step dt.
struct LinearModel {
    Eigen::MatrixXd A, B;
    Eigen::VectorXd s_star, u_star;
    double dt = 0.0;
};

struct LqrWeights {
    Eigen::MatrixXd Q, R;
};

/// Quadratic weights read off the reward coefficients.
inline LqrWeights reward_weights(SystemKind kind) {
    LqrWeights w;
    if (kind == SystemKind::PlanarQuadrotor) {
        Eigen::VectorXd q(6);
        q << 1.0, 0.1, 1.0, 0.1, 1.0, 0.1;
        w.Q = q.asDiagonal();
        w.R = 1e-4 * Eigen::MatrixXd::Identity(2, 2);
    } else {
        Eigen::VectorXd q(4);
        q << 5.0, 5.0, 0.5, 0.5;
        w.Q = q.asDiagonal();
        w.R = 5e-5 * Eigen::MatrixXd::Identity(2, 2);
    }
    return w;
}

/// Zero-order-hold discretization by truncated matrix exponential:
/// A_d = sum_{k<=8} (A dt)^k / k!,  B_d = (sum_{k<=8} A^k dt^{k+1}/(k+1)!) B.
inline void discretize(const Eigen::MatrixXd& a_c, const Eigen::MatrixXd& b_c, double dt,
                       Eigen::MatrixXd& a_d, Eigen::MatrixXd& b_d) {
    const int n = static_cast<int>(a_c.rows());
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    a_d = term;
    Eigen::MatrixXd bsum = dt * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd bterm = bsum;
    for (int k = 1; k <= 8; ++k) {
        term = term * a_c * (dt / k);
        a_d += term;
        bterm = bterm * a_c * (dt / (k + 1));
        bsum += bterm;
    }
    b_d = bsum * b_c;
}

/// Jacobian linearization at an equilibrium (central differences, step 1e-6),
/// discretized with the truncated matrix exponential above.
inline LinearModel linearize(const SystemSpec& sp, const StateVector& s_star,
                             const ControlVector& u_star) {
    const int n = sp.state_dim, m = sp.control_dim;
    const StateVector f0 = sysdyn::deriv(sp, s_star, u_star);
    for (double v : f0)
        if (std::abs(v) > 1e-8)
            throw std::invalid_argument("linearize: (s*, u*) is not an equilibrium, |deriv| = " +
                                        g17(std::abs(v)));

    const double h = 1e-6;
    Eigen::MatrixXd a_c(n, n), b_c(n, m);
    for (int j = 0; j < n; ++j) {
        StateVector sp1 = s_star, sm1 = s_star;
        sp1[j] += h;
        sm1[j] -= h;
        const StateVector fp = sysdyn::deriv(sp, sp1, u_star), fm = sysdyn::deriv(sp, sm1, u_star);
        for (int i = 0; i < n; ++i) a_c(i, j) = (fp[i] - fm[i]) / (2.0 * h);
    }
    for (int j = 0; j < m; ++j) {
        ControlVector up = u_star, um = u_star;
        up[j] += h;
        um[j] -= h;
        const StateVector fp = sysdyn::deriv(sp, s_star, up), fm = sysdyn::deriv(sp, s_star, um);
        for (int i = 0; i < n; ++i) b_c(i, j) = (fp[i] - fm[i]) / (2.0 * h);
    }

    LinearModel model;
    model.dt = sp.dt;
    model.s_star = Eigen::Map<const Eigen::VectorXd>(s_star.data(), n);
    model.u_star = Eigen::Map<const Eigen::VectorXd>(u_star.data(), m);
    discretize(a_c, b_c, sp.dt, model.A, model.B);
    return model;
}

struct DareSolution {
    Eigen::MatrixXd P, K;
    int iterations = 0;
    double residual = 0.0;  ///< final |P_{k+1} - P_k|_inf
};

/// Fixed-point iteration on the gamma-discounted DARE,
///   P <- Q + g A'PA - g^2 A'PB (R + g B'PB)^{-1} B'PA,
/// symmetrized each step, until |dP|_inf < 1e-12 (cap 1e5 iterations).
inline DareSolution dare_solve(const LinearModel& model, const LqrWeights& w, double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("dare_solve: gamma must lie in (0, 1]");
    const Eigen::MatrixXd& A = model.A;
    const Eigen::MatrixXd& B = model.B;

    DareSolution sol;
    Eigen::MatrixXd P = w.Q;
    const int cap = 100000;
    double diff = 0.0;
    for (int it = 1; it <= cap; ++it) {
        const Eigen::MatrixXd bpb = w.R + gamma * B.transpose() * P * B;
        const Eigen::MatrixXd gain = bpb.ldlt().solve(B.transpose() * P * A);
        Eigen::MatrixXd next =
            w.Q + gamma * A.transpose() * P * A - gamma * gamma * A.transpose() * P * B * gain;
        next = 0.5 * (next + next.transpose());
        diff = (next - P).cwiseAbs().maxCoeff();
        if (!std::isfinite(diff))
            throw std::runtime_error("dare_solve: iteration diverged (non-finite P)");
        P = next;
        if (diff < 1e-12) {
            sol.P = P;
            sol.K = gamma * (w.R + gamma * B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
            sol.iterations = it;
            sol.residual = diff;
            return sol;
        }
    }
    throw std::runtime_error("dare_solve: iteration cap reached, residual |dP|_inf = " + g17(diff));
}

/// Spectral radius via power iteration on the growth rate of |M^k v|.
inline double spectral_radius(const Eigen::MatrixXd& m, int iters = 600, std::uint64_t seed = 7) {
    RngStream rng(seed);
    Eigen::VectorXd v(m.rows());
    for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
    v.normalize();
    double acc = 0.0;
    int counted = 0;
    for (int k = 0; k < iters; ++k) {
        v = m * v;
        const double nrm = v.norm();
        if (nrm == 0.0) return 0.0;
        if (k >= iters / 5) {  // discard the transient
            acc += std::log(nrm);
            ++counted;
        }
        v /= nrm;
    }
    return std::exp(acc / counted);
}

/// Wraps the solved gain as a linear policy u = -K s + b with b = u* + K s*.
inline policy::GaussianPolicy lqr_policy(const SystemSpec& sp, const LinearModel& model,
                                         const DareSolution& sol, double sigma = 0.0) {
    const int n = sp.state_dim, m = sp.control_dim;
    std::vector<double> gain(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) gain[static_cast<std::size_t>(i) * n + j] = sol.K(i, j);
    const Eigen::VectorXd b = model.u_star + sol.K * model.s_star;
    std::vector<double> bias(m);
    for (int i = 0; i < m; ++i) bias[i] = b[i];
    policy::MeanMap mm = policy::linear_map(n, m, std::move(gain), std::move(bias));
    return sigma > 0.0 ? policy::isotropic_policy(std::move(mm), sigma)
                       : policy::deterministic_policy(std::move(mm));
}

}  // namespace mollikit::riccati
