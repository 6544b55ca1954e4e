#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mollikit::sysdyn {

using StateVector = std::vector<double>;
using ControlVector = std::vector<double>;

enum class SystemKind { DoublePendulum, PlanarQuadrotor };
enum class IntegrateMethod { RK4, Euler };

/// Physical constants, step size and saturation box for one benchmark system.
struct SystemSpec {
    SystemKind kind;
    int state_dim = 0;
    int control_dim = 0;
    double dt = 0.0;
    std::vector<double> sat_lo, sat_hi;

    // double pendulum
    double inertia1 = 0, inertia2 = 0, mass1 = 0, mass2 = 0;
    double len1 = 0, len2 = 0, com1 = 0, com2 = 0;
    // planar quadrotor
    double mass = 0, inertia = 0, arm = 0;
    // shared
    double gravity = 9.81;
};

inline SystemSpec double_pendulum_spec() {
    SystemSpec s;
    s.kind = SystemKind::DoublePendulum;
    s.state_dim = 4;
    s.control_dim = 2;
    s.dt = 0.01;
    s.sat_lo = {-10.0, -10.0};
    s.sat_hi = {10.0, 10.0};
    s.inertia1 = s.inertia2 = 0.1;
    s.mass1 = s.mass2 = 0.15;
    s.len1 = s.len2 = 0.5;
    s.com1 = s.com2 = 0.25;
    return s;
}

inline SystemSpec planar_quadrotor_spec() {
    SystemSpec s;
    s.kind = SystemKind::PlanarQuadrotor;
    s.state_dim = 6;
    s.control_dim = 2;
    s.dt = 0.1;
    s.sat_lo = {0.0, 0.0};
    s.sat_hi = {10.0, 10.0};
    s.mass = 1.0;
    s.inertia = 0.1;
    s.arm = 0.5;
    return s;
}

inline SystemSpec system_spec(SystemKind kind) {
    return kind == SystemKind::DoublePendulum ? double_pendulum_spec() : planar_quadrotor_spec();
}

inline std::string system_name(SystemKind kind) {
    return kind == SystemKind::DoublePendulum ? "double_pendulum" : "planar_quadrotor";
}

/// Manipulator-equation dynamics of the double pendulum:
/// M(q) q" + C(q, q') q' = tau(q) + B u with B = I, state (th1, th2, th1', th2').
inline void dp_deriv_raw(const SystemSpec& sp, const double* s, const double* u, double* ds) {
    const double th1 = s[0], th2 = s[1], w1 = s[2], w2 = s[3];
    const double c2 = std::cos(th2), s2 = std::sin(th2);
    const double a = sp.mass2 * sp.len1 * sp.com2;  // m2 l1 lc2

    const double m11 = sp.inertia1 + sp.inertia2 + sp.mass2 * sp.len1 * sp.len1 + 2.0 * a * c2;
    const double m12 = sp.inertia2 + a * c2;
    const double m22 = sp.inertia2;

    const double cq1 = (-2.0 * a * s2 * w2) * w1 + (-a * s2 * w2) * w2;
    const double cq2 = (a * s2 * w1) * w1;

    const double g = sp.gravity;
    const double tau1 = -sp.mass1 * g * sp.com1 * std::sin(th1) -
                        sp.mass2 * g * (sp.len1 * std::sin(th1) + sp.com2 * std::sin(th1 + th2));
    const double tau2 = -sp.mass2 * g * sp.com2 * std::sin(th1 + th2);

    const double r1 = tau1 + u[0] - cq1;
    const double r2 = tau2 + u[1] - cq2;

    const double det = m11 * m22 - m12 * m12;
    if (std::abs(det) < 1e-12)
        throw std::runtime_error("dp_deriv: singular mass matrix, det=" + std::to_string(det));

    ds[0] = w1;
    ds[1] = w2;
    ds[2] = (m22 * r1 - m12 * r2) / det;
    ds[3] = (-m12 * r1 + m11 * r2) / det;
}

/// Planar quadrotor, state (x1, x2, y1, y2, th, w). The y1 equation is taken
/// as y1' = y2 (see README on conventions); the gravity term is written
/// literally as -m*g, which equals -g for m = 1.
inline void quad_deriv_raw(const SystemSpec& sp, const double* s, const double* u, double* ds) {
    const double th = s[4], w = s[5];
    const double thrust = u[0] + u[1];
    ds[0] = s[1];
    ds[1] = -(thrust / sp.mass) * std::sin(th);
    ds[2] = s[3];
    ds[3] = (thrust / sp.mass) * std::cos(th) - sp.mass * sp.gravity;
    ds[4] = w;
    ds[5] = (sp.arm / sp.inertia) * (u[0] - u[1]);
}

inline void deriv_raw(const SystemSpec& sp, const double* s, const double* u, double* ds) {
    if (sp.kind == SystemKind::DoublePendulum)
        dp_deriv_raw(sp, s, u, ds);
    else
        quad_deriv_raw(sp, s, u, ds);
}

inline StateVector dp_deriv(const SystemSpec& sp, const StateVector& s, const ControlVector& u) {
    StateVector ds(4);
    dp_deriv_raw(sp, s.data(), u.data(), ds.data());
    return ds;
}

inline StateVector quad_deriv(const SystemSpec& sp, const StateVector& s, const ControlVector& u) {
    StateVector ds(6);
    quad_deriv_raw(sp, s.data(), u.data(), ds.data());
    return ds;
}

inline StateVector deriv(const SystemSpec& sp, const StateVector& s, const ControlVector& u) {
    StateVector ds(sp.state_dim);
    deriv_raw(sp, s.data(), u.data(), ds.data());
    return ds;
}

inline void saturate_raw(const SystemSpec& sp, double* u) {
    for (int i = 0; i < sp.control_dim; ++i) {
        if (u[i] < sp.sat_lo[i]) u[i] = sp.sat_lo[i];
        if (u[i] > sp.sat_hi[i]) u[i] = sp.sat_hi[i];
    }
}

inline ControlVector saturate(const ControlVector& u, const SystemSpec& sp) {
    ControlVector out = u;
    saturate_raw(sp, out.data());
    return out;
}

inline constexpr int kMaxStateDim = 6;

/// One zero-order-hold step; the control is held constant across the step.
inline void integrate_step_raw(const SystemSpec& sp, double* s, const double* u, IntegrateMethod method) {
    const int n = sp.state_dim;
    const double dt = sp.dt;
    double k1[kMaxStateDim], k2[kMaxStateDim], k3[kMaxStateDim], k4[kMaxStateDim], tmp[kMaxStateDim];
    deriv_raw(sp, s, u, k1);
    if (method == IntegrateMethod::Euler) {
        for (int i = 0; i < n; ++i) s[i] += dt * k1[i];
        return;
    }
    for (int i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * dt * k1[i];
    deriv_raw(sp, tmp, u, k2);
    for (int i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * dt * k2[i];
    deriv_raw(sp, tmp, u, k3);
    for (int i = 0; i < n; ++i) tmp[i] = s[i] + dt * k3[i];
    deriv_raw(sp, tmp, u, k4);
    for (int i = 0; i < n; ++i) s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline StateVector integrate_step(const SystemSpec& sp, const StateVector& s, const ControlVector& u,
                                  IntegrateMethod method = IntegrateMethod::RK4) {
    StateVector out = s;
    integrate_step_raw(sp, out.data(), u.data(), method);
    return out;
}

/// Generic fixed-step integrators for arbitrary autonomous derivatives; used
/// by tests with scalar toy systems and by closed-loop probes.
template <class Deriv>
inline std::vector<double> rk4_step(Deriv&& f, const std::vector<double>& s, double dt) {
    const std::size_t n = s.size();
    std::vector<double> k1 = f(s), tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * dt * k1[i];
    std::vector<double> k2 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * dt * k2[i];
    std::vector<double> k3 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + dt * k3[i];
    std::vector<double> k4 = f(tmp);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

template <class Deriv>
inline std::vector<double> euler_step(Deriv&& f, const std::vector<double>& s, double dt) {
    std::vector<double> k = f(s), out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] + dt * k[i];
    return out;
}

/// Divergence guard shared by rollouts and probes: a state is out of range
/// once any entry is non-finite or exceeds 1e6 in magnitude.
inline bool state_in_range(const double* s, int n) {
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(s[i]) || std::abs(s[i]) > 1e6) return false;
    }
    return true;
}

inline bool state_in_range(const StateVector& s) {
    return state_in_range(s.data(), static_cast<int>(s.size()));
}

}  // namespace mollikit::sysdyn
