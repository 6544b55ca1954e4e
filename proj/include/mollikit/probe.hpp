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
#include "mollikit/sysdyn.hpp"

namespace mollikit::probe {

using policy::ParamVector;
using sysdyn::StateVector;
using sysdyn::SystemSpec;

/// Landscape samples around a center parameter along 1 or 2 directions.
struct ScanGrid {
    ParamVector center;
    std::vector<ParamVector> directions;  ///< 1 or 2 unit vectors, orthonormal when 2
    std::vector<double> offsets1;
    std::vector<double> offsets2;  ///< empty for 1-D scans
    std::vector<double> values;    ///< row-major over (offsets1, offsets2)

    bool two_d() const { return !offsets2.empty(); }
};

namespace detail {

inline double dot(const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void validate_directions(const ParamVector& center, const std::vector<ParamVector>& dirs) {
    if (dirs.empty() || dirs.size() > 2)
        throw std::invalid_argument("scan: need 1 or 2 directions");
    for (const auto& d : dirs) {
        if (d.size() != center.size())
            throw std::invalid_argument("scan: direction dimension mismatch");
        if (std::abs(std::sqrt(dot(d, d)) - 1.0) > 1e-9)
            throw std::invalid_argument("scan: directions must be unit vectors");
    }
    if (dirs.size() == 2 && std::abs(dot(dirs[0], dirs[1])) > 1e-9)
        throw std::invalid_argument("scan: 2-D directions must be orthonormal");
}

}  // namespace detail

/// Evaluates eval(center + off1*dir1 [+ off2*dir2]) on the grid, row-major.
/// Deterministic eval makes the fill order immaterial; grid points run in
/// parallel with index-ordered storage.
template <class Eval>
inline ScanGrid scan(Eval&& eval, ParamVector center, std::vector<ParamVector> directions,
                     std::vector<double> offsets1, std::vector<double> offsets2 = {}) {
    detail::validate_directions(center, directions);
    if (offsets1.empty()) throw std::invalid_argument("scan: offsets must be non-empty");
    if (!offsets2.empty() && directions.size() != 2)
        throw std::invalid_argument("scan: 2-D grid needs 2 directions");

    ScanGrid grid;
    grid.center = std::move(center);
    grid.directions = std::move(directions);
    grid.offsets1 = std::move(offsets1);
    grid.offsets2 = std::move(offsets2);

    const std::size_t n1 = grid.offsets1.size();
    const std::size_t n2 = grid.two_d() ? grid.offsets2.size() : 1;
    grid.values.assign(n1 * n2, 0.0);
    parallel_for(n1 * n2, [&](std::size_t idx) {
        const std::size_t i = idx / n2, j = idx % n2;
        ParamVector theta = grid.center;
        for (std::size_t p = 0; p < theta.size(); ++p) {
            theta[p] += grid.offsets1[i] * grid.directions[0][p];
            if (grid.two_d()) theta[p] += grid.offsets2[j] * grid.directions[1][p];
        }
        grid.values[idx] = eval(theta);
    });
    return grid;
}

/// Maximal Lyapunov exponent estimate (Benettin two-trajectory method).
struct MleResult {
    double lambda = 0.0;       ///< per unit time (dt_per_step = 1 for maps)
    int renorm_interval = 0;
    double delta0 = 0.0;
    int steps = 0;
    int skipped_events = 0;    ///< renormalization events dropped as transient
};

/// Generic discrete-step version: `step` maps a state vector to the next
/// state. Accumulates ln(d/delta0) every renorm_every steps, drops the first
/// 10% of events as transient, and divides by the elapsed time of the rest.
template <class Step>
inline MleResult mle_estimate_map(Step&& step, const std::vector<double>& x0, int steps,
                                  double delta0, int renorm_every, double dt_per_step = 1.0) {
    if (!(delta0 >= 1e-9 && delta0 <= 1e-5))
        throw std::invalid_argument("mle_estimate: delta0 must lie in [1e-9, 1e-5]");
    if (renorm_every < 1) throw std::invalid_argument("mle_estimate: renorm_every must be >= 1");
    if (steps < 10 * renorm_every)
        throw std::invalid_argument("mle_estimate: need steps >= 10 * renorm_every");

    const std::size_t n = x0.size();
    std::vector<double> x = x0, y = x0;
    y[0] += delta0;

    std::vector<double> logs;
    logs.reserve(steps / renorm_every);
    for (int k = 1; k <= steps; ++k) {
        x = step(x);
        y = step(y);
        if (!sysdyn::state_in_range(x) || !sysdyn::state_in_range(y))
            throw std::runtime_error("mle_estimate: lambda undefined: escape");
        if (k % renorm_every == 0) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) d2 += (y[i] - x[i]) * (y[i] - x[i]);
            const double d = std::sqrt(d2);
            if (d == 0.0)
                throw std::runtime_error("mle_estimate: trajectories collapsed to zero separation");
            logs.push_back(std::log(d / delta0));
            const double scale = delta0 / d;
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + scale * (y[i] - x[i]);
        }
    }

    MleResult res;
    res.renorm_interval = renorm_every;
    res.delta0 = delta0;
    res.steps = steps;
    res.skipped_events = static_cast<int>(logs.size() / 10);
    double acc = 0.0;
    for (std::size_t e = res.skipped_events; e < logs.size(); ++e) acc += logs[e];
    const double elapsed =
        static_cast<double>(logs.size() - res.skipped_events) * renorm_every * dt_per_step;
    res.lambda = acc / elapsed;
    return res;
}

/// Closed-loop MLE of a system under the deterministic mean policy; lambda is
/// per second (the step is one integration step of size spec.dt).
inline MleResult mle_estimate(const SystemSpec& sp, const policy::GaussianPolicy& p,
                              const StateVector& s0, int steps, double delta0, int renorm_every) {
    auto step = [&](const std::vector<double>& s) {
        std::vector<double> out = s;
        double u[8];
        policy::mean_action_raw(p.mean, out.data(), u);
        sysdyn::saturate_raw(sp, u);
        sysdyn::integrate_step_raw(sp, out.data(), u, sysdyn::IntegrateMethod::RK4);
        return out;
    };
    return mle_estimate_map(step, s0, steps, delta0, renorm_every, sp.dt);
}

struct HolderFit {
    double alpha = 0.0;
    double residual = 0.0;  ///< RMS residual of the log-log fit
    int scales_used = 0;
};

/// Least-squares slope of log|f(center + h_j dir) - f(center)| against
/// log h_j on a dyadic ladder. The grid must hold the center value at
/// offset 0 followed by offsets h_j = h0 * 2^{-j}, j = 0..J, J >= 6.
inline HolderFit holder_estimate(const ScanGrid& grid) {
    if (grid.two_d()) throw std::invalid_argument("holder_estimate: needs a 1-D scan");
    const auto& off = grid.offsets1;
    if (off.size() < 8 || off[0] != 0.0)
        throw std::invalid_argument(
            "holder_estimate: offsets must be {0, h0, h0/2, ..., h0/2^J} with J >= 6");
    for (std::size_t j = 2; j < off.size(); ++j) {
        if (std::abs(off[j] / off[j - 1] - 0.5) > 1e-9)
            throw std::invalid_argument("holder_estimate: offsets must halve at each scale");
    }

    const double f0 = grid.values[0];
    std::vector<double> lx, ly;
    for (std::size_t j = 1; j < off.size(); ++j) {
        const double inc = std::abs(grid.values[j] - f0);
        if (inc == 0.0) continue;  // scale excluded
        lx.push_back(std::log(off[j]));
        ly.push_back(std::log(inc));
    }
    if (lx.size() < 4)
        throw std::runtime_error("holder_estimate: fewer than 4 usable scales");

    const std::size_t n = lx.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mx += lx[i]; my += ly[i]; }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    HolderFit fit;
    fit.alpha = sxy / sxx;
    fit.scales_used = static_cast<int>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (my + fit.alpha * (lx[i] - mx));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

/// Dyadic offset ladder {0, h0, h0/2, ..., h0/2^J} for holder_estimate.
inline std::vector<double> dyadic_offsets(double h0, int levels) {
    std::vector<double> off{0.0};
    double h = h0;
    for (int j = 0; j <= levels; ++j) {
        off.push_back(h);
        h *= 0.5;
    }
    return off;
}

/// Random unit vector (for scan/holder directions).
inline ParamVector random_unit_direction(std::size_t dim, RngStream& rng) {
    ParamVector d(dim);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (auto& v : d) {
            v = rng.normal();
            norm2 += v * v;
        }
    } while (norm2 < 1e-12);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : d) v *= inv;
    return d;
}

/// Columns: i, j, off1, off2, value.
inline std::string scan_csv(const ScanGrid& grid) {
    std::string out = "i,j,off1,off2,value\n";
    const std::size_t n2 = grid.two_d() ? grid.offsets2.size() : 1;
    for (std::size_t i = 0; i < grid.offsets1.size(); ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            const double off2 = grid.two_d() ? grid.offsets2[j] : 0.0;
            out += std::to_string(i) + "," + std::to_string(j) + "," + g17(grid.offsets1[i]) +
                   "," + g17(off2) + "," + g17(grid.values[i * n2 + j]) + "\n";
        }
    }
    return out;
}

/// Columns: system, lambda, delta0, steps.
inline std::string mle_csv(const std::vector<std::pair<std::string, MleResult>>& rows) {
    std::string out = "system,lambda,delta0,steps\n";
    for (const auto& [name, r] : rows)
        out += name + "," + g17(r.lambda) + "," + g17(r.delta0) + "," + std::to_string(r.steps) + "\n";
    return out;
}

}  // namespace mollikit::probe
