#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mollikit/pgrad.hpp"

using namespace mollikit;
using namespace mollikit::pgrad;
using policy::isotropic_policy;
using policy::linear_map;

namespace {

// One-step quadratic toy: the quadrotor from the origin with horizon 1 and a
// bias-only policy has G = -1e-4 |a|^2, so the mollified objective is
// F(mu, sigma^2) = -1e-4 (|mu|^2 + m sigma^2) with optimum a* = 0.
constexpr double kRewardScale = 1e-4;

struct Toy {
    sysdyn::SystemSpec sp = sysdyn::planar_quadrotor_spec();
    objective::RolloutConfig cfg;
    Toy() {
        cfg = objective::default_rollout_config(sp.kind);
        cfg.horizon = 1;
    }
    GaussianPolicy policy(double mu1, double mu2, double sigma, bool train_sigma = false) const {
        return isotropic_policy(linear_map(6, 2, std::vector<double>(12, 0.0), {mu1, mu2}), sigma,
                                train_sigma);
    }
};

}  // namespace

TEST_CASE("normalize scales to unit length and keeps zero at zero") {
    CHECK(normalize({3.0, 4.0}) == ParamVector{0.6, 0.8});
    CHECK(normalize({0.0, 0.0}) == ParamVector{0.0, 0.0});
    RngStream rng(4);
    for (int t = 0; t < 20; ++t) {
        ParamVector g(5);
        for (auto& v : g) v = 10.0 * rng.normal();
        const ParamVector u = normalize(g);
        double n2 = 0;
        for (double v : u) n2 += v * v;
        CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-12);
    }
}

TEST_CASE("single-rollout batch with mean baseline gives the exact zero gradient") {
    const Toy toy;
    PgConfig pg;
    pg.batch = 1;
    pg.seed = 5;
    const GradientEstimate est = estimate_gradient(toy.sp, toy.policy(5, 5, 0.5), toy.cfg, pg);
    for (double v : est.gradient) CHECK(v == 0.0);
    CHECK(est.grad_norm == 0.0);
}

TEST_CASE("toy gradient matches the closed-form mollified gradient") {
    const Toy toy;
    const double mu1 = 5.0, mu2 = 6.0, sigma = 0.5;
    PgConfig pg;
    pg.batch = 100000;
    pg.seed = 71;
    const GradientEstimate est = estimate_gradient(toy.sp, toy.policy(mu1, mu2, sigma), toy.cfg, pg);

    // E[grad wrt bias] = -2 * 1e-4 * mu  (the analytic mollified gradient)
    const double g1 = -2.0 * kRewardScale * mu1;
    const double g2 = -2.0 * kRewardScale * mu2;
    const std::size_t bias_off = 12;
    CHECK(std::abs(est.gradient[bias_off] - g1) / std::abs(g1) < 0.05);
    CHECK(std::abs(est.gradient[bias_off + 1] - g2) / std::abs(g2) < 0.05);
    // gain block sees s0 = 0, so its exact value is zero
    for (std::size_t i = 0; i < bias_off; ++i) CHECK(est.gradient[i] == 0.0);
}

TEST_CASE("toy gradient matches finite differences of the sampled objective (common random numbers)") {
    const Toy toy;
    const double sigma = 0.5, h = 0.01;
    PgConfig pg;
    pg.batch = 100000;
    pg.seed = 72;

    auto sampled_objective = [&](double mu1, double mu2) {
        return estimate_gradient(toy.sp, toy.policy(mu1, mu2, sigma), toy.cfg, pg).mean_return;
    };
    const GradientEstimate est = estimate_gradient(toy.sp, toy.policy(5, 6, sigma), toy.cfg, pg);
    const double fd1 = (sampled_objective(5 + h, 6) - sampled_objective(5 - h, 6)) / (2 * h);
    const double fd2 = (sampled_objective(5, 6 + h) - sampled_objective(5, 6 - h)) / (2 * h);
    CHECK(std::abs(est.gradient[12] - fd1) / std::abs(fd1) < 0.05);
    CHECK(std::abs(est.gradient[13] - fd2) / std::abs(fd2) < 0.05);
}

TEST_CASE("trainable sigma recovers dF/dsigma^2 = -m * scale (the half-Laplacian identity)") {
    const Toy toy;
    const double sigma = 0.5;
    PgConfig pg;
    pg.batch = 200000;
    pg.seed = 73;
    const GradientEstimate est =
        estimate_gradient(toy.sp, toy.policy(5, 6, sigma, true), toy.cfg, pg);
    const double d_sigma2 = est.gradient.back() / (2.0 * sigma);
    // F has Laplacian -2 m scale, and dF/dt = Laplacian/2 = -m scale
    CHECK(std::abs(d_sigma2 - (-2.0 * kRewardScale)) / (2.0 * kRewardScale) < 0.10);
}

TEST_CASE("estimator is unbiased across independent batches") {
    const Toy toy;
    const double mu1 = 5.0, mu2 = 6.0, sigma = 0.5;
    const int batches = 20;
    std::vector<double> means1, means2;
    for (int r = 0; r < batches; ++r) {
        PgConfig pg;
        pg.batch = 10000;
        pg.seed = 100 + r;
        const GradientEstimate est =
            estimate_gradient(toy.sp, toy.policy(mu1, mu2, sigma), toy.cfg, pg);
        means1.push_back(est.gradient[12]);
        means2.push_back(est.gradient[13]);
    }
    auto check_mean = [&](const std::vector<double>& xs, double expect) {
        double mean = 0;
        for (double v : xs) mean += v;
        mean /= xs.size();
        double ss = 0;
        for (double v : xs) ss += (v - mean) * (v - mean);
        const double se = std::sqrt(ss / (xs.size() - 1) / xs.size());
        CHECK(std::abs(mean - expect) < 4.0 * se);
    };
    check_mean(means1, -2.0 * kRewardScale * mu1);
    check_mean(means2, -2.0 * kRewardScale * mu2);
}

TEST_CASE("batch-mean baseline preserves the estimator expectation") {
    const Toy toy;
    PgConfig with, without;
    with.batch = without.batch = 100000;
    with.seed = without.seed = 74;
    without.baseline = Baseline::None;
    const GradientEstimate a = estimate_gradient(toy.sp, toy.policy(5, 6, 0.5), toy.cfg, with);
    const GradientEstimate b = estimate_gradient(toy.sp, toy.policy(5, 6, 0.5), toy.cfg, without);
    for (std::size_t i : {std::size_t(12), std::size_t(13)}) {
        const double expect = -2.0 * kRewardScale * (i == 12 ? 5.0 : 6.0);
        CHECK(std::abs(a.gradient[i] - expect) / std::abs(expect) < 0.05);
        CHECK(std::abs(b.gradient[i] - expect) / std::abs(expect) < 0.10);
    }
}

TEST_CASE("return-to-go weighting agrees with the whole-return estimator in expectation") {
    const Toy toy;  // horizon 1: the two weightings coincide step-wise
    PgConfig whole, togo;
    whole.batch = togo.batch = 20000;
    whole.seed = togo.seed = 75;
    togo.return_to_go = true;
    const GradientEstimate a = estimate_gradient(toy.sp, toy.policy(5, 6, 0.5), toy.cfg, whole);
    const GradientEstimate b = estimate_gradient(toy.sp, toy.policy(5, 6, 0.5), toy.cfg, togo);
    CHECK(a.gradient[12] == Catch::Approx(b.gradient[12]).margin(1e-12));
    CHECK(a.gradient[13] == Catch::Approx(b.gradient[13]).margin(1e-12));
}

TEST_CASE("zero step size keeps the parameters and the returns frozen") {
    const auto sp = sysdyn::double_pendulum_spec();
    auto cfg = objective::default_rollout_config(sp.kind);
    cfg.horizon = 100;
    PgConfig pg;
    pg.batch = 4;
    pg.epochs = 3;
    pg.delta = 0.0;
    pg.seed = 9;
    const auto p = isotropic_policy(policy::initial_mean_map(sp.kind), 0.1);
    const TrainRecord rec = train(sp, p, cfg, pg);
    REQUIRE(rec.epochs.size() == 4);
    for (const auto& row : rec.epochs) {
        CHECK(row.theta == rec.epochs[0].theta);
        CHECK(row.j_det == rec.epochs[0].j_det);
    }
}

TEST_CASE("one training step applies delta times the normalized gradient") {
    const auto sp = sysdyn::double_pendulum_spec();
    auto cfg = objective::default_rollout_config(sp.kind);
    cfg.horizon = 50;
    PgConfig pg;
    pg.batch = 3;
    pg.epochs = 1;
    pg.delta = 0.25;
    pg.seed = 40;
    const auto p = isotropic_policy(policy::initial_mean_map(sp.kind), 0.1);
    const TrainRecord rec = train(sp, p, cfg, pg);

    const GradientEstimate est = estimate_gradient(sp, p, cfg, pg, 0);
    const ParamVector dir = normalize(est.gradient);
    REQUIRE(rec.epochs.size() == 2);
    for (std::size_t i = 0; i < dir.size(); ++i)
        CHECK(rec.epochs[1].theta[i] == rec.epochs[0].theta[i] + 0.25 * dir[i]);
}

TEST_CASE("training is deterministic given the seed") {
    const auto sp = sysdyn::double_pendulum_spec();
    auto cfg = objective::default_rollout_config(sp.kind);
    cfg.horizon = 120;
    PgConfig pg;
    pg.batch = 4;
    pg.epochs = 4;
    pg.delta = 0.5;
    pg.seed = 314;
    const auto p = isotropic_policy(policy::initial_mean_map(sp.kind), 0.1);
    const TrainRecord a = train(sp, p, cfg, pg);
    const TrainRecord b = train(sp, p, cfg, pg);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t e = 0; e < a.epochs.size(); ++e) {
        CHECK(a.epochs[e].j_det == b.epochs[e].j_det);
        CHECK(a.epochs[e].j_stoch_mean == b.epochs[e].j_stoch_mean);
        CHECK(a.epochs[e].grad_norm == b.epochs[e].grad_norm);
        CHECK(a.epochs[e].theta == b.epochs[e].theta);
    }
}

TEST_CASE("train record CSV carries one row per epoch including epoch zero") {
    const auto sp = sysdyn::double_pendulum_spec();
    auto cfg = objective::default_rollout_config(sp.kind);
    cfg.horizon = 30;
    PgConfig pg;
    pg.batch = 2;
    pg.epochs = 2;
    pg.seed = 1;
    const auto p = isotropic_policy(policy::initial_mean_map(sp.kind), 0.1);
    const std::string csv = train_record_csv(train(sp, p, cfg, pg), pg.seed, 0.1);
    CHECK(csv.rfind("epoch,seed,sigma,J_det,J_stoch_mean,grad_norm\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("estimator rejects invalid configurations") {
    const Toy toy;
    PgConfig pg;
    pg.batch = 0;
    CHECK_THROWS(estimate_gradient(toy.sp, toy.policy(5, 5, 0.5), toy.cfg, pg));
    pg.batch = 2;
    CHECK_THROWS(estimate_gradient(
        toy.sp, policy::deterministic_policy(policy::initial_mean_map(toy.sp.kind)), toy.cfg, pg));
}
