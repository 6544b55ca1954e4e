#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mollikit/csv.hpp"
#include "mollikit/rng.hpp"
#include "mollikit/sysdyn.hpp"

namespace mollikit::policy {

using sysdyn::ControlVector;
using sysdyn::StateVector;
using sysdyn::SystemKind;

using ParamVector = std::vector<double>;

/// Deterministic mean map: either u = -K s + b or u = W2 tanh(W1 s). A linear
/// map may omit the bias (u = -K s), matching the pendulum experiments.
struct MeanMap {
    enum class Kind { Linear, Mlp };
    Kind kind = Kind::Linear;
    int n = 0;  ///< state dimension
    int m = 0;  ///< control dimension
    int h = 0;  ///< hidden width (Mlp only)
    bool has_bias = true;      ///< Linear only; bias entries are trainable iff set
    std::vector<double> gain;  ///< K, m x n row-major (Linear)
    std::vector<double> bias;  ///< b, length m (Linear)
    std::vector<double> w1;    ///< h x n row-major (Mlp)
    std::vector<double> w2;    ///< m x h row-major (Mlp)
};

inline MeanMap linear_map(int n, int m, std::vector<double> gain, std::vector<double> bias) {
    if (static_cast<int>(gain.size()) != m * n || static_cast<int>(bias.size()) != m)
        throw std::invalid_argument("linear_map: dimension mismatch");
    MeanMap mm;
    mm.kind = MeanMap::Kind::Linear;
    mm.n = n;
    mm.m = m;
    mm.gain = std::move(gain);
    mm.bias = std::move(bias);
    return mm;
}

inline MeanMap linear_map_no_bias(int n, int m, std::vector<double> gain) {
    MeanMap mm = linear_map(n, m, std::move(gain), std::vector<double>(m, 0.0));
    mm.has_bias = false;
    return mm;
}

inline MeanMap mlp_map(int n, int m, int h, std::vector<double> w1, std::vector<double> w2) {
    if (static_cast<int>(w1.size()) != h * n || static_cast<int>(w2.size()) != m * h)
        throw std::invalid_argument("mlp_map: dimension mismatch");
    MeanMap mm;
    mm.kind = MeanMap::Kind::Mlp;
    mm.n = n;
    mm.m = m;
    mm.h = h;
    mm.w1 = std::move(w1);
    mm.w2 = std::move(w2);
    return mm;
}

/// Tanh MLP weights drawn uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline MeanMap mlp_map_random(int n, int m, int h, RngStream& rng) {
    std::vector<double> w1(static_cast<std::size_t>(h) * n), w2(static_cast<std::size_t>(m) * h);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(n));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(h));
    for (auto& w : w1) w = a1 * (2.0 * rng.uniform() - 1.0);
    for (auto& w : w2) w = a2 * (2.0 * rng.uniform() - 1.0);
    return mlp_map(n, m, h, std::move(w1), std::move(w2));
}

enum class NoiseKind { Deterministic, Isotropic, Diagonal };

/// Gaussian policy pi(a|s) = N(mu(s), Sigma). Immutable value type; sampling
/// needs an explicitly passed stream.
struct GaussianPolicy {
    MeanMap mean;
    NoiseKind noise = NoiseKind::Deterministic;
    double sigma = 0.0;                ///< isotropic std deviation
    std::vector<double> diag_var;      ///< per-dimension variances r_i (Diagonal)
    bool train_sigma = false;          ///< append sigma to the parameter vector
};

inline GaussianPolicy deterministic_policy(MeanMap mean) {
    GaussianPolicy p;
    p.mean = std::move(mean);
    return p;
}

inline GaussianPolicy isotropic_policy(MeanMap mean, double sigma, bool train_sigma = false) {
    if (sigma <= 0.0) throw std::invalid_argument("isotropic_policy: sigma must be > 0");
    GaussianPolicy p;
    p.mean = std::move(mean);
    p.noise = NoiseKind::Isotropic;
    p.sigma = sigma;
    p.train_sigma = train_sigma;
    return p;
}

inline GaussianPolicy diagonal_policy(MeanMap mean, std::vector<double> variances) {
    if (static_cast<int>(variances.size()) != mean.m)
        throw std::invalid_argument("diagonal_policy: variance count != m");
    for (double r : variances)
        if (r <= 0.0) throw std::invalid_argument("diagonal_policy: variances must be > 0");
    GaussianPolicy p;
    p.mean = std::move(mean);
    p.noise = NoiseKind::Diagonal;
    p.diag_var = std::move(variances);
    return p;
}

inline constexpr int kMaxHidden = 64;

/// mu(s); no saturation here, the rollout applies it to whatever it executes.
inline void mean_action_raw(const MeanMap& mm, const double* s, double* u) {
    if (mm.kind == MeanMap::Kind::Linear) {
        for (int i = 0; i < mm.m; ++i) {
            double acc = mm.has_bias ? mm.bias[i] : 0.0;
            const double* row = mm.gain.data() + static_cast<std::size_t>(i) * mm.n;
            for (int j = 0; j < mm.n; ++j) acc -= row[j] * s[j];
            u[i] = acc;
        }
    } else {
        double hid[kMaxHidden];
        for (int l = 0; l < mm.h; ++l) {
            double acc = 0.0;
            const double* row = mm.w1.data() + static_cast<std::size_t>(l) * mm.n;
            for (int j = 0; j < mm.n; ++j) acc += row[j] * s[j];
            hid[l] = std::tanh(acc);
        }
        for (int i = 0; i < mm.m; ++i) {
            double acc = 0.0;
            const double* row = mm.w2.data() + static_cast<std::size_t>(i) * mm.h;
            for (int l = 0; l < mm.h; ++l) acc += row[l] * hid[l];
            u[i] = acc;
        }
    }
}

inline ControlVector mean_action(const GaussianPolicy& p, const StateVector& s) {
    if (static_cast<int>(s.size()) != p.mean.n)
        throw std::invalid_argument("mean_action: state dimension mismatch");
    ControlVector u(p.mean.m);
    mean_action_raw(p.mean, s.data(), u.data());
    return u;
}

inline void sample_action_raw(const GaussianPolicy& p, const double* s, RngStream& rng, double* u) {
    mean_action_raw(p.mean, s, u);
    if (p.noise == NoiseKind::Isotropic) {
        for (int i = 0; i < p.mean.m; ++i) u[i] += p.sigma * rng.normal();
    } else {
        for (int i = 0; i < p.mean.m; ++i) u[i] += std::sqrt(p.diag_var[i]) * rng.normal();
    }
}

inline ControlVector sample_action(const GaussianPolicy& p, const StateVector& s, RngStream& rng) {
    if (p.noise == NoiseKind::Deterministic)
        throw std::logic_error("sample_action: policy is deterministic");
    ControlVector u(p.mean.m);
    sample_action_raw(p, s.data(), rng, u.data());
    return u;
}

/// Number of trainable parameters (zeta, plus sigma when trained).
inline int param_count(const GaussianPolicy& p) {
    const MeanMap& mm = p.mean;
    int n = mm.kind == MeanMap::Kind::Linear ? mm.m * mm.n + (mm.has_bias ? mm.m : 0)
                                             : mm.h * mm.n + mm.m * mm.h;
    if (p.train_sigma) ++n;
    return n;
}

/// Canonical flattening: K row-major then b, or W1 row-major then W2
/// row-major, optionally followed by sigma.
inline ParamVector pack(const GaussianPolicy& p) {
    ParamVector theta;
    theta.reserve(param_count(p));
    const MeanMap& mm = p.mean;
    if (mm.kind == MeanMap::Kind::Linear) {
        theta.insert(theta.end(), mm.gain.begin(), mm.gain.end());
        if (mm.has_bias) theta.insert(theta.end(), mm.bias.begin(), mm.bias.end());
    } else {
        theta.insert(theta.end(), mm.w1.begin(), mm.w1.end());
        theta.insert(theta.end(), mm.w2.begin(), mm.w2.end());
    }
    if (p.train_sigma) theta.push_back(p.sigma);
    return theta;
}

inline void unpack(GaussianPolicy& p, const ParamVector& theta) {
    if (static_cast<int>(theta.size()) != param_count(p))
        throw std::invalid_argument("unpack: parameter count mismatch");
    MeanMap& mm = p.mean;
    std::size_t off = 0;
    if (mm.kind == MeanMap::Kind::Linear) {
        std::copy(theta.begin(), theta.begin() + mm.gain.size(), mm.gain.begin());
        off += mm.gain.size();
        if (mm.has_bias) {
            std::copy(theta.begin() + off, theta.begin() + off + mm.bias.size(), mm.bias.begin());
            off += mm.bias.size();
        }
    } else {
        std::copy(theta.begin(), theta.begin() + mm.w1.size(), mm.w1.begin());
        off += mm.w1.size();
        std::copy(theta.begin() + off, theta.begin() + off + mm.w2.size(), mm.w2.begin());
        off += mm.w2.size();
    }
    if (p.train_sigma) {
        p.sigma = theta[off];
        if (p.sigma <= 0.0) throw std::domain_error("unpack: sigma must stay > 0");
    }
}

/// Accumulates grad_theta log pi(a|s) into `out` (sized param_count), scaled
/// by `weight`. `a` is the raw sampled action, before saturation.
inline void score_accumulate(const GaussianPolicy& p, const double* s, const double* a,
                             double weight, double* out) {
    const MeanMap& mm = p.mean;
    if (p.noise == NoiseKind::Deterministic)
        throw std::logic_error("score: policy is deterministic");
    if (p.noise == NoiseKind::Isotropic && p.sigma <= 0.0)
        throw std::domain_error("score: sigma must be > 0");

    double mu[8];
    double hid[kMaxHidden];
    if (mm.kind == MeanMap::Kind::Mlp) {
        for (int l = 0; l < mm.h; ++l) {
            double acc = 0.0;
            const double* row = mm.w1.data() + static_cast<std::size_t>(l) * mm.n;
            for (int j = 0; j < mm.n; ++j) acc += row[j] * s[j];
            hid[l] = std::tanh(acc);
        }
        for (int i = 0; i < mm.m; ++i) {
            double acc = 0.0;
            const double* row = mm.w2.data() + static_cast<std::size_t>(i) * mm.h;
            for (int l = 0; l < mm.h; ++l) acc += row[l] * hid[l];
            mu[i] = acc;
        }
    } else {
        mean_action_raw(mm, s, mu);
    }

    double resid[8];  // (a - mu) / variance_i
    double sq = 0.0;
    for (int i = 0; i < mm.m; ++i) {
        const double d = a[i] - mu[i];
        sq += d * d;
        const double var = p.noise == NoiseKind::Isotropic ? p.sigma * p.sigma : p.diag_var[i];
        resid[i] = d / var;
    }

    std::size_t off = 0;
    if (mm.kind == MeanMap::Kind::Linear) {
        for (int i = 0; i < mm.m; ++i) {
            double* row = out + static_cast<std::size_t>(i) * mm.n;
            const double wi = weight * resid[i];
            for (int j = 0; j < mm.n; ++j) row[j] -= wi * s[j];  // d mu_i / d K_ij = -s_j
        }
        off = static_cast<std::size_t>(mm.m) * mm.n;
        if (mm.has_bias) {
            for (int i = 0; i < mm.m; ++i) out[off + i] += weight * resid[i];
            off += mm.m;
        }
    } else {
        // back-propagate through tanh
        double dhid[kMaxHidden];
        for (int l = 0; l < mm.h; ++l) {
            double acc = 0.0;
            for (int i = 0; i < mm.m; ++i) acc += mm.w2[static_cast<std::size_t>(i) * mm.h + l] * resid[i];
            dhid[l] = acc * (1.0 - hid[l] * hid[l]);
        }
        for (int l = 0; l < mm.h; ++l) {
            double* row = out + static_cast<std::size_t>(l) * mm.n;
            const double wl = weight * dhid[l];
            for (int j = 0; j < mm.n; ++j) row[j] += wl * s[j];
        }
        off = static_cast<std::size_t>(mm.h) * mm.n;
        for (int i = 0; i < mm.m; ++i) {
            double* row = out + off + static_cast<std::size_t>(i) * mm.h;
            const double wi = weight * resid[i];
            for (int l = 0; l < mm.h; ++l) row[l] += wi * hid[l];
        }
        off += static_cast<std::size_t>(mm.m) * mm.h;
    }
    if (p.train_sigma) {
        // d/d sigma log pi = (|a - mu|^2 - m sigma^2) / sigma^3
        const double s3 = p.sigma * p.sigma * p.sigma;
        out[off] += weight * (sq - mm.m * p.sigma * p.sigma) / s3;
    }
}

inline ParamVector score(const GaussianPolicy& p, const StateVector& s, const ControlVector& a) {
    ParamVector out(param_count(p), 0.0);
    score_accumulate(p, s.data(), a.data(), 1.0, out.data());
    return out;
}

// --- checkpoint format: header "kind n m h sigma", then parameters in pack
// order (without sigma, which lives in the header) ---

inline std::string checkpoint_string(const GaussianPolicy& p) {
    const MeanMap& mm = p.mean;
    std::string out = mm.kind == MeanMap::Kind::Mlp ? "mlp "
                      : mm.has_bias                 ? "linear "
                                                    : "linear_nobias ";
    out += std::to_string(mm.n) + " " + std::to_string(mm.m) + " " + std::to_string(mm.h) + " ";
    out += g17(p.noise == NoiseKind::Isotropic ? p.sigma : 0.0);
    out += "\n";
    GaussianPolicy flat = p;
    flat.train_sigma = false;
    const ParamVector theta = pack(flat);
    for (std::size_t i = 0; i < theta.size(); ++i)
        out += (i ? " " : "") + g17(theta[i]);
    out += "\n";
    return out;
}

inline void save_checkpoint(const GaussianPolicy& p, const std::string& path) {
    write_text_file(path, checkpoint_string(p));
}

inline GaussianPolicy parse_checkpoint(const std::string& text) {
    std::istringstream in(text);
    std::string kind;
    int n = 0, m = 0, h = 0;
    double sigma = 0.0;
    if (!(in >> kind >> n >> m >> h >> sigma))
        throw std::runtime_error("checkpoint: malformed header");
    MeanMap mm;
    if (kind == "linear" || kind == "linear_nobias") {
        std::vector<double> gain(static_cast<std::size_t>(m) * n), bias(m, 0.0);
        for (auto& v : gain)
            if (!(in >> v)) throw std::runtime_error("checkpoint: truncated parameters");
        if (kind == "linear") {
            for (auto& v : bias)
                if (!(in >> v)) throw std::runtime_error("checkpoint: truncated parameters");
            mm = linear_map(n, m, std::move(gain), std::move(bias));
        } else {
            mm = linear_map_no_bias(n, m, std::move(gain));
        }
    } else if (kind == "mlp") {
        std::vector<double> w1(static_cast<std::size_t>(h) * n), w2(static_cast<std::size_t>(m) * h);
        for (auto& v : w1)
            if (!(in >> v)) throw std::runtime_error("checkpoint: truncated parameters");
        for (auto& v : w2)
            if (!(in >> v)) throw std::runtime_error("checkpoint: truncated parameters");
        mm = mlp_map(n, m, h, std::move(w1), std::move(w2));
    } else {
        throw std::runtime_error("checkpoint: unknown kind '" + kind + "'");
    }
    return sigma > 0.0 ? isotropic_policy(std::move(mm), sigma) : deterministic_policy(std::move(mm));
}

inline GaussianPolicy load_checkpoint(const std::string& path) {
    return parse_checkpoint(read_text_file(path));
}

// --- benchmark initial policies ---

/// Double pendulum initial gain (u = -K s, no bias). Loaded in the
/// stabilizing orientation; see README on gain-sign conventions.
inline std::vector<double> pendulum_initial_gain() {
    return {20.0, 20.0854, 21.4826, 10.0516,
            18.22, 19.143, 9.2905, 6.6695};
}

/// Planar quadrotor LQR initial policy u = -K0 s + b0 (the hover optimum).
inline std::vector<double> quadrotor_initial_gain() {
    return {-2.2361, -3.3404, 2.2361, 2.69, 13.5092, 2.7752,
            2.2361, 3.3404, 2.2361, 2.69, -13.5092, -2.7752};
}

inline std::vector<double> quadrotor_initial_bias() { return {4.905, 4.905}; }

inline MeanMap initial_mean_map(SystemKind kind) {
    if (kind == SystemKind::DoublePendulum)
        return linear_map_no_bias(4, 2, pendulum_initial_gain());
    return linear_map(6, 2, quadrotor_initial_gain(), quadrotor_initial_bias());
}

inline GaussianPolicy initial_policy(SystemKind kind, double sigma, bool train_sigma = false) {
    MeanMap mm = initial_mean_map(kind);
    return sigma > 0.0 ? isotropic_policy(std::move(mm), sigma, train_sigma)
                       : deterministic_policy(std::move(mm));
}

}  // namespace mollikit::policy
