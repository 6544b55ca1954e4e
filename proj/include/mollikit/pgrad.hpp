#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mollikit/csv.hpp"
#include "mollikit/objective.hpp"
#include "mollikit/parallel.hpp"
#include "mollikit/policy.hpp"
#include "mollikit/rng.hpp"

namespace mollikit::pgrad {

using objective::RolloutConfig;
using policy::GaussianPolicy;
using policy::ParamVector;
using sysdyn::SystemSpec;

enum class Baseline { None, BatchMean };

struct PgConfig {
    int batch = 16;
    int epochs = 50;
    double delta = 1.0;  ///< step size applied to the normalized gradient
    std::uint64_t seed = 1;
    Baseline baseline = Baseline::BatchMean;
    /// REINFORCE weighting: whole-trajectory return by default, discounted
    /// return-to-go per step when set.
    bool return_to_go = false;
};

inline ParamVector normalize(const ParamVector& g) {
    double sq = 0.0;
    for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm <= 1e-12) return ParamVector(g.size(), 0.0);
    ParamVector out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] / norm;
    return out;
}

struct GradientEstimate {
    ParamVector gradient;
    std::vector<double> returns;  ///< per-rollout discounted returns
    double grad_norm = 0.0;       ///< L2 norm before normalization
    double mean_return = 0.0;
};

namespace detail {

/// One stochastic rollout that records what the estimator needs: per-step
/// rewards and per-step score vectors (flattened). Frozen steps after a
/// divergence keep the last reward and a zero score.
struct RolloutTape {
    std::vector<double> rewards;  ///< length horizon
    std::vector<double> scores;   ///< horizon x P, row-major
    double return_ = 0.0;
};

inline void run_tape(const SystemSpec& sp, const GaussianPolicy& p, const RolloutConfig& cfg,
                     RngStream rng, bool per_step_scores, RolloutTape& tape) {
    const int n = sp.state_dim, m = sp.control_dim;
    const int pcount = policy::param_count(p);
    const int H = cfg.horizon;

    tape.rewards.assign(H, 0.0);
    tape.scores.assign(per_step_scores ? static_cast<std::size_t>(H) * pcount : pcount, 0.0);
    tape.return_ = 0.0;

    double s[sysdyn::kMaxStateDim], u[8], uraw[8];
    for (int i = 0; i < n; ++i) s[i] = cfg.s0[i];
    double disc = 1.0;

    for (int k = 0; k < H; ++k) {
        policy::sample_action_raw(p, s, rng, uraw);
        double* slot = per_step_scores ? tape.scores.data() + static_cast<std::size_t>(k) * pcount
                                       : tape.scores.data();
        policy::score_accumulate(p, s, uraw, 1.0, slot);
        for (int i = 0; i < m; ++i) u[i] = uraw[i];
        sysdyn::saturate_raw(sp, u);
        const double r = objective::reward(sp, s, u);
        tape.rewards[k] = r;
        tape.return_ += disc * r;
        disc *= cfg.gamma;
        sysdyn::integrate_step_raw(sp, s, u, cfg.method);
        if (!sysdyn::state_in_range(s, n)) {
            for (int j = k + 1; j < H; ++j) {
                tape.rewards[j] = r;
                tape.return_ += disc * r;
                disc *= cfg.gamma;
            }
            return;
        }
    }
}

}  // namespace detail

/// Score-function gradient estimate from a batch of stochastic rollouts.
/// Per-rollout streams are derived from (seed, epoch, rollout index), so the
/// result is independent of how the batch is scheduled across workers.
inline GradientEstimate estimate_gradient(const SystemSpec& sp, const GaussianPolicy& p,
                                          const RolloutConfig& cfg, const PgConfig& pg,
                                          int epoch = 0) {
    if (pg.batch < 1) throw std::invalid_argument("estimate_gradient: batch must be >= 1");
    if (p.noise != policy::NoiseKind::Isotropic || p.sigma <= 0.0)
        throw std::invalid_argument("estimate_gradient: needs an isotropic policy with sigma > 0");

    RolloutConfig scfg = cfg;
    scfg.stochastic = true;
    const int B = pg.batch;
    const int pcount = policy::param_count(p);
    const int H = cfg.horizon;

    std::vector<detail::RolloutTape> tapes(B);
    parallel_for(B, [&](std::size_t b) {
        RngStream rng(mix_seed(pg.seed, static_cast<std::uint64_t>(epoch), b));
        detail::run_tape(sp, p, scfg, rng, pg.return_to_go, tapes[b]);
    });

    GradientEstimate est;
    est.gradient.assign(pcount, 0.0);
    est.returns.resize(B);
    for (int b = 0; b < B; ++b) est.returns[b] = tapes[b].return_;

    if (!pg.return_to_go) {
        double base = 0.0;
        if (pg.baseline == Baseline::BatchMean) {
            for (double g : est.returns) base += g;
            base /= B;
        }
        for (int b = 0; b < B; ++b) {
            const double w = (est.returns[b] - base) / B;
            const double* sc = tapes[b].scores.data();
            for (int i = 0; i < pcount; ++i) est.gradient[i] += w * sc[i];
        }
    } else {
        // discounted return-to-go with a per-step batch-mean baseline
        std::vector<std::vector<double>> togo(B, std::vector<double>(H));
        for (int b = 0; b < B; ++b) {
            double acc = 0.0;
            for (int k = H - 1; k >= 0; --k) {
                acc = tapes[b].rewards[k] + cfg.gamma * acc;
                togo[b][k] = acc;
            }
        }
        std::vector<double> base(H, 0.0);
        if (pg.baseline == Baseline::BatchMean) {
            for (int k = 0; k < H; ++k) {
                for (int b = 0; b < B; ++b) base[k] += togo[b][k];
                base[k] /= B;
            }
        }
        double disc = 1.0;
        for (int k = 0; k < H; ++k) {
            for (int b = 0; b < B; ++b) {
                const double w = disc * (togo[b][k] - base[k]) / B;
                const double* sc = tapes[b].scores.data() + static_cast<std::size_t>(k) * pcount;
                for (int i = 0; i < pcount; ++i) est.gradient[i] += w * sc[i];
            }
            disc *= cfg.gamma;
        }
    }

    double sq = 0.0;
    for (double v : est.gradient) sq += v * v;
    est.grad_norm = std::sqrt(sq);
    for (double g : est.returns) est.mean_return += g;
    est.mean_return /= B;
    return est;
}

struct EpochStats {
    int epoch = 0;
    double j_det = 0.0;        ///< deterministic return of theta_k
    double j_stoch_mean = 0.0; ///< mean return of the batch sampled at theta_k
    double grad_norm = 0.0;    ///< estimate norm before normalization
    ParamVector theta;
};

struct TrainRecord {
    std::vector<EpochStats> epochs;  ///< length epochs+1, including epoch 0
};

/// Gradient-ascent epochs: theta <- theta + delta * normalize(estimate).
/// Row k holds the deterministic J(theta_k) plus the statistics of the batch
/// sampled at theta_k; the final row's batch is evaluation-only.
inline TrainRecord train(const SystemSpec& sp, GaussianPolicy p, const RolloutConfig& cfg,
                         const PgConfig& pg) {
    if (pg.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    if (pg.delta < 0.0) throw std::invalid_argument("train: delta must be >= 0");

    RolloutConfig det = cfg;
    det.stochastic = false;

    TrainRecord rec;
    rec.epochs.reserve(pg.epochs + 1);
    for (int e = 0; e <= pg.epochs; ++e) {
        GradientEstimate est = estimate_gradient(sp, p, cfg, pg, e);
        EpochStats row;
        row.epoch = e;
        row.j_det = objective::rollout_return(sp, p, det);
        row.j_stoch_mean = est.mean_return;
        row.grad_norm = est.grad_norm;
        row.theta = policy::pack(p);
        rec.epochs.push_back(std::move(row));
        if (e == pg.epochs) break;
        const ParamVector dir = normalize(est.gradient);
        ParamVector theta = policy::pack(p);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += pg.delta * dir[i];
        policy::unpack(p, theta);
    }
    return rec;
}

/// Columns: epoch, seed, sigma, J_det, J_stoch_mean, grad_norm.
inline std::string train_record_csv(const TrainRecord& rec, std::uint64_t seed, double sigma) {
    std::string out = "epoch,seed,sigma,J_det,J_stoch_mean,grad_norm\n";
    for (const auto& row : rec.epochs) {
        out += std::to_string(row.epoch) + "," + std::to_string(seed) + "," + g17(sigma) + "," +
               g17(row.j_det) + "," + g17(row.j_stoch_mean) + "," + g17(row.grad_norm) + "\n";
    }
    return out;
}

}  // namespace mollikit::pgrad
