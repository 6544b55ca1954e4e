#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mollikit/csv.hpp"
#include "mollikit/policy.hpp"
#include "mollikit/rng.hpp"
#include "mollikit/sysdyn.hpp"

namespace mollikit::objective {

using policy::GaussianPolicy;
using sysdyn::ControlVector;
using sysdyn::StateVector;
using sysdyn::SystemKind;
using sysdyn::SystemSpec;

/// Per-step reward. Both benchmarks use negated quadratic costs, so rewards
/// are <= 0 everywhere and the reward is evaluated on the applied
/// (saturated) control.
inline double reward(const SystemSpec& sp, const double* s, const double* a) {
    const double uu = a[0] * a[0] + a[1] * a[1];
    if (sp.kind == SystemKind::DoublePendulum) {
        return -(5.0 * (s[0] * s[0] + s[1] * s[1]) + 0.5 * (s[2] * s[2] + s[3] * s[3]) +
                 5e-5 * uu);
    }
    return -(s[0] * s[0] + s[2] * s[2] + s[4] * s[4] +
             0.1 * (s[1] * s[1] + s[3] * s[3] + s[5] * s[5]) + 1e-4 * uu);
}

struct RolloutConfig {
    int horizon = 1000;
    double gamma = 0.99;
    StateVector s0;
    bool stochastic = false;
    sysdyn::IntegrateMethod method = sysdyn::IntegrateMethod::RK4;
};

inline StateVector default_initial_state(SystemKind kind) {
    if (kind == SystemKind::DoublePendulum) return {-0.2, 0.2, 0.0, 0.0};
    return StateVector(6, 0.0);
}

inline RolloutConfig default_rollout_config(SystemKind kind) {
    RolloutConfig cfg;
    cfg.s0 = default_initial_state(kind);
    return cfg;
}

struct TrajectoryStep {
    StateVector state;
    ControlVector action;  ///< applied (saturated) control
    double reward = 0.0;
};

/// A rollout record. On divergence (non-finite state or |entry| > 1e6) the
/// remaining steps repeat the last finite state, action and reward, so the
/// discounted return stays finite and recomputable from the steps.
struct Trajectory {
    std::vector<TrajectoryStep> steps;
    std::vector<ControlVector> raw_actions;  ///< pre-saturation policy outputs, live steps only
    double return_ = 0.0;
    bool diverged = false;
    int diverged_at = -1;
};

inline void check_rollout_args(const SystemSpec& sp, const GaussianPolicy& p,
                               const RolloutConfig& cfg, const RngStream* rng) {
    if (p.mean.n != sp.state_dim || p.mean.m != sp.control_dim)
        throw std::invalid_argument("rollout: policy/system dimension mismatch");
    if (static_cast<int>(cfg.s0.size()) != sp.state_dim)
        throw std::invalid_argument("rollout: s0 dimension mismatch");
    if (cfg.horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0))
        throw std::invalid_argument("rollout: gamma must lie in (0,1)");
    if (cfg.stochastic && rng == nullptr)
        throw std::invalid_argument("rollout: stochastic mode needs an rng stream");
    if (cfg.stochastic && p.noise == policy::NoiseKind::Deterministic)
        throw std::invalid_argument("rollout: stochastic mode needs a stochastic policy");
}

inline Trajectory rollout(const SystemSpec& sp, const GaussianPolicy& p, const RolloutConfig& cfg,
                          RngStream* rng = nullptr) {
    check_rollout_args(sp, p, cfg, rng);
    const int n = sp.state_dim, m = sp.control_dim;

    Trajectory traj;
    traj.steps.reserve(cfg.horizon);

    double s[sysdyn::kMaxStateDim], u[8];
    for (int i = 0; i < n; ++i) s[i] = cfg.s0[i];
    double disc = 1.0;

    for (int k = 0; k < cfg.horizon; ++k) {
        if (traj.diverged) {
            traj.steps.push_back(traj.steps.back());
            traj.return_ += disc * traj.steps.back().reward;
            disc *= cfg.gamma;
            continue;
        }
        if (cfg.stochastic)
            policy::sample_action_raw(p, s, *rng, u);
        else
            policy::mean_action_raw(p.mean, s, u);
        traj.raw_actions.emplace_back(u, u + m);
        sysdyn::saturate_raw(sp, u);
        const double r = reward(sp, s, u);
        traj.steps.push_back({StateVector(s, s + n), ControlVector(u, u + m), r});
        traj.return_ += disc * r;
        disc *= cfg.gamma;
        sysdyn::integrate_step_raw(sp, s, u, cfg.method);
        if (!sysdyn::state_in_range(s, n)) {
            traj.diverged = true;
            traj.diverged_at = k;
        }
    }
    return traj;
}

/// Discounted return only; allocation-free hot path used by scans, training
/// statistics and Monte Carlo probes.
inline double rollout_return(const SystemSpec& sp, const GaussianPolicy& p, const RolloutConfig& cfg,
                             RngStream* rng = nullptr) {
    check_rollout_args(sp, p, cfg, rng);
    const int n = sp.state_dim;

    double s[sysdyn::kMaxStateDim], u[8];
    for (int i = 0; i < n; ++i) s[i] = cfg.s0[i];
    double total = 0.0, disc = 1.0, last_r = 0.0;

    for (int k = 0; k < cfg.horizon; ++k) {
        if (cfg.stochastic)
            policy::sample_action_raw(p, s, *rng, u);
        else
            policy::mean_action_raw(p.mean, s, u);
        sysdyn::saturate_raw(sp, u);
        last_r = reward(sp, s, u);
        total += disc * last_r;
        disc *= cfg.gamma;
        sysdyn::integrate_step_raw(sp, s, u, cfg.method);
        if (!sysdyn::state_in_range(s, n)) {
            // freeze: remaining steps repeat the current reward
            total += last_r * disc * (1.0 - std::pow(cfg.gamma, cfg.horizon - 1 - k)) /
                     (1.0 - cfg.gamma);
            return total;
        }
    }
    return total;
}

/// Q-probe: applies saturate(a0) first, then follows the deterministic mean
/// policy; returns the discounted sum.
inline double q_value(const SystemSpec& sp, const GaussianPolicy& p, const StateVector& s0,
                      const ControlVector& a0, const RolloutConfig& cfg) {
    if (static_cast<int>(a0.size()) != sp.control_dim)
        throw std::invalid_argument("q_value: a0 dimension mismatch");
    const int n = sp.state_dim;

    double s[sysdyn::kMaxStateDim], u[8];
    for (int i = 0; i < n; ++i) s[i] = s0[i];
    double total = 0.0, disc = 1.0, last_r = 0.0;

    for (int k = 0; k < cfg.horizon; ++k) {
        if (k == 0)
            for (int i = 0; i < sp.control_dim; ++i) u[i] = a0[i];
        else
            policy::mean_action_raw(p.mean, s, u);
        sysdyn::saturate_raw(sp, u);
        last_r = reward(sp, s, u);
        total += disc * last_r;
        disc *= cfg.gamma;
        sysdyn::integrate_step_raw(sp, s, u, cfg.method);
        if (!sysdyn::state_in_range(s, n)) {
            total += last_r * disc * (1.0 - std::pow(cfg.gamma, cfg.horizon - 1 - k)) /
                     (1.0 - cfg.gamma);
            return total;
        }
    }
    return total;
}

/// Columns: k, s_1..s_n, a_1..a_m, reward.
inline std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "k";
    if (!traj.steps.empty()) {
        for (std::size_t i = 1; i <= traj.steps[0].state.size(); ++i)
            out += ",s_" + std::to_string(i);
        for (std::size_t i = 1; i <= traj.steps[0].action.size(); ++i)
            out += ",a_" + std::to_string(i);
    }
    out += ",reward\n";
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
        const auto& st = traj.steps[k];
        out += std::to_string(k);
        for (double v : st.state) out += "," + g17(v);
        for (double v : st.action) out += "," + g17(v);
        out += "," + g17(st.reward) + "\n";
    }
    return out;
}

}  // namespace mollikit::objective
