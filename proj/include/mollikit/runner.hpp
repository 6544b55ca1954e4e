#pragma once

#include <algorithm>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mollikit/csv.hpp"
#include "mollikit/heatlab.hpp"
#include "mollikit/objective.hpp"
#include "mollikit/pgrad.hpp"
#include "mollikit/policy.hpp"
#include "mollikit/probe.hpp"
#include "mollikit/riccati.hpp"
#include "mollikit/svg.hpp"
#include "mollikit/sysdyn.hpp"

namespace mollikit::runner {

using sysdyn::ControlVector;
using sysdyn::StateVector;

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const std::set<std::string>& known_commands() {
    static const std::set<std::string> cmds = {"simulate", "train", "scan", "qscan",
                                               "mollify",  "heat",  "backward", "uncertainty",
                                               "mle",      "holder", "lqr",     "sweep"};
    return cmds;
}

/// Fully resolved experiment configuration; every field has a value after
/// parse_config and is echoed into the run manifest.
struct ExperimentConfig {
    std::string command;
    sysdyn::SystemKind system = sysdyn::SystemKind::DoublePendulum;

    int batch = 16;
    int epochs = 50;
    int horizon = 1000;
    double gamma = 0.99;
    double delta = 1.0;
    double sigma = 0.1;
    std::vector<double> sigmas;
    std::vector<std::uint64_t> seeds;
    std::string init = "paper";  ///< paper | lqr | zero | checkpoint path
    std::string out_dir = "out";
    std::string baseline = "mean";  ///< mean | none
    bool svg = false;
    bool train_sigma = false;
    bool return_to_go = false;
    bool stochastic = false;
    std::vector<double> s0;  ///< empty = system default

    int scan_points = 41;
    double scan_radius = 0.5;
    int scan_dims = 1;
    std::string scan_direction = "random";  ///< random | bias-asymmetry

    int grid_n = 1024;
    double domain_l = std::numbers::pi;
    double heat_time = 1.0;
    int heat_times = 64;
    std::string heat_method = "spectral";
    double heat_alpha = 0.5;

    double backward_t = 0.25;
    int backward_kmax = 32;
    int noise_mode = 0;
    double noise_eps = 1e-6;

    int mc_samples = 100000;
    int probe_points = 20;
    double probe_radius = 0.5;
    int slice_horizon = 400;

    int mle_steps = 40000;
    double mle_delta0 = 1e-7;
    int mle_renorm = 20;

    double holder_h0 = 0.5;
    int holder_levels = 10;
    std::string holder_target = "objective";  ///< objective | weierstrass

    int uncertainty_count = 10;
};

namespace detail {

struct RawEntry {
    std::string value;
    int line = 0;  ///< 0 means command-line flag
};

inline std::string where(const RawEntry& e) {
    return e.line > 0 ? " (line " + std::to_string(e.line) + ")" : " (flag)";
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "command",      "system",        "batch",          "epochs",       "horizon",
        "gamma",        "delta",         "sigma",          "sigmas",       "seeds",
        "init",         "out",           "baseline",       "svg",          "train_sigma",
        "return_to_go", "stochastic",    "s0",             "scan_points",  "scan_radius",
        "scan_dims",    "scan_direction", "grid_n",        "domain_l",     "heat_time",
        "heat_times",   "heat_method",   "heat_alpha",     "backward_t",   "backward_kmax",
        "noise_mode",   "noise_eps",     "mc_samples",     "probe_points", "probe_radius",
        "slice_horizon", "mle_steps",    "mle_delta0",     "mle_renorm",   "holder_h0",
        "holder_levels", "holder_target", "uncertainty_count"};
    return keys;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::map<std::string, RawEntry> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::map<std::string, RawEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key=value (line " + std::to_string(lineno) + "): " + line);
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError("empty key (line " + std::to_string(lineno) + ")");
        entries[key] = {trim(line.substr(eq + 1)), lineno};
    }
    return entries;
}

inline long long parse_int(const std::string& key, const RawEntry& e) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("key '" + key + "': expected integer, got '" + e.value + "'" + where(e));
    }
}

inline double parse_double(const std::string& key, const RawEntry& e) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("key '" + key + "': expected number, got '" + e.value + "'" + where(e));
    }
}

inline bool parse_bool(const std::string& key, const RawEntry& e) {
    if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
    if (e.value == "false" || e.value == "0" || e.value == "no") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + e.value + "'" + where(e));
}

inline std::vector<double> parse_double_list(const std::string& key, const RawEntry& e) {
    std::vector<double> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(key, {item, e.line}));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list" + where(e));
    return out;
}

/// Seeds: comma-separated non-negative integers; an element may be an
/// inclusive range "a..b".
inline std::vector<std::uint64_t> parse_seeds(const RawEntry& e) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto dots = item.find("..");
        if (dots != std::string::npos) {
            const long long a = parse_int("seeds", {item.substr(0, dots), e.line});
            const long long b = parse_int("seeds", {item.substr(dots + 2), e.line});
            if (a < 0 || b < a)
                throw ConfigError("key 'seeds': bad range '" + item + "'" + where(e));
            for (long long s = a; s <= b; ++s) out.push_back(static_cast<std::uint64_t>(s));
        } else {
            const long long s = parse_int("seeds", {item, e.line});
            if (s < 0) throw ConfigError("key 'seeds': seeds must be >= 0" + where(e));
            out.push_back(static_cast<std::uint64_t>(s));
        }
    }
    if (out.empty()) throw ConfigError("key 'seeds': seeds must be non-empty" + where(e));
    return out;
}

}  // namespace detail

/// Merges a key=value config file with command-line overrides, fills
/// Table-style defaults for omitted keys, and validates every constraint.
/// Unknown keys, type mismatches and constraint violations name the key and
/// the source line.
inline ExperimentConfig parse_config(const std::string& command,
                                     const std::string& config_path,
                                     const std::vector<std::pair<std::string, std::string>>& flags) {
    using detail::RawEntry;
    if (!known_commands().count(command))
        throw ConfigError("unknown command '" + command + "'");

    std::map<std::string, RawEntry> raw;
    if (!config_path.empty()) raw = detail::read_config_file(config_path);
    for (const auto& [k, v] : flags) raw[k] = {v, 0};

    for (const auto& [k, e] : raw)
        if (!detail::known_keys().count(k))
            throw ConfigError("unknown key '" + k + "'" + detail::where(e));

    ExperimentConfig cfg;
    cfg.command = command;
    if (auto it = raw.find("command"); it != raw.end() && it->second.value != command)
        throw ConfigError("key 'command': config file says '" + it->second.value +
                          "' but the invocation is '" + command + "'" + detail::where(it->second));

    if (auto it = raw.find("system"); it != raw.end()) {
        const std::string& v = it->second.value;
        if (v == "double_pendulum" || v == "pendulum")
            cfg.system = sysdyn::SystemKind::DoublePendulum;
        else if (v == "planar_quadrotor" || v == "quadrotor")
            cfg.system = sysdyn::SystemKind::PlanarQuadrotor;
        else
            throw ConfigError("key 'system': expected double_pendulum or planar_quadrotor, got '" +
                              v + "'" + detail::where(it->second));
    }

    // Table defaults that depend on command/system
    cfg.batch = command == "sweep" ? 32 : 16;
    cfg.epochs = command == "sweep" ? 100 : 50;
    cfg.delta = cfg.system == sysdyn::SystemKind::PlanarQuadrotor ? 0.001 : 1.0;
    cfg.sigmas = command == "mollify" ? std::vector<double>{0.1, 0.2, 0.5}
                                      : std::vector<double>{0.005, 0.05, 0.5, 5.0};
    cfg.seeds = {1};
    cfg.scan_direction =
        cfg.system == sysdyn::SystemKind::PlanarQuadrotor ? "bias-asymmetry" : "random";

    auto geti = [&](const char* key, int lo, long long hi, int& dst) {
        if (auto it = raw.find(key); it != raw.end()) {
            const long long v = detail::parse_int(key, it->second);
            if (v < lo || v > hi)
                throw ConfigError("key '" + std::string(key) + "': value " + std::to_string(v) +
                                  " out of range [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]" + detail::where(it->second));
            dst = static_cast<int>(v);
        }
    };
    auto getd = [&](const char* key, double& dst) {
        if (auto it = raw.find(key); it != raw.end()) dst = detail::parse_double(key, it->second);
    };
    auto getb = [&](const char* key, bool& dst) {
        if (auto it = raw.find(key); it != raw.end()) dst = detail::parse_bool(key, it->second);
    };
    auto gets = [&](const char* key, std::string& dst) {
        if (auto it = raw.find(key); it != raw.end()) dst = it->second.value;
    };

    geti("batch", 1, 1000000, cfg.batch);
    geti("epochs", 0, 1000000, cfg.epochs);
    geti("horizon", 1, 100000000, cfg.horizon);
    getd("gamma", cfg.gamma);
    getd("delta", cfg.delta);
    getd("sigma", cfg.sigma);
    if (auto it = raw.find("sigmas"); it != raw.end())
        cfg.sigmas = detail::parse_double_list("sigmas", it->second);
    if (auto it = raw.find("seeds"); it != raw.end()) cfg.seeds = detail::parse_seeds(it->second);
    gets("init", cfg.init);
    gets("out", cfg.out_dir);
    gets("baseline", cfg.baseline);
    getb("svg", cfg.svg);
    getb("train_sigma", cfg.train_sigma);
    getb("return_to_go", cfg.return_to_go);
    getb("stochastic", cfg.stochastic);
    if (auto it = raw.find("s0"); it != raw.end())
        cfg.s0 = detail::parse_double_list("s0", it->second);

    geti("scan_points", 2, 100000, cfg.scan_points);
    getd("scan_radius", cfg.scan_radius);
    geti("scan_dims", 1, 2, cfg.scan_dims);
    gets("scan_direction", cfg.scan_direction);

    geti("grid_n", 8, 1 << 20, cfg.grid_n);
    getd("domain_l", cfg.domain_l);
    getd("heat_time", cfg.heat_time);
    geti("heat_times", 2, 100000, cfg.heat_times);
    gets("heat_method", cfg.heat_method);
    getd("heat_alpha", cfg.heat_alpha);

    getd("backward_t", cfg.backward_t);
    geti("backward_kmax", 0, 1 << 20, cfg.backward_kmax);
    geti("noise_mode", 0, 1 << 20, cfg.noise_mode);
    getd("noise_eps", cfg.noise_eps);

    geti("mc_samples", 2, 1000000000, cfg.mc_samples);
    geti("probe_points", 1, 100000, cfg.probe_points);
    getd("probe_radius", cfg.probe_radius);
    geti("slice_horizon", 1, 100000000, cfg.slice_horizon);

    geti("mle_steps", 1, 1000000000, cfg.mle_steps);
    getd("mle_delta0", cfg.mle_delta0);
    geti("mle_renorm", 1, 1000000, cfg.mle_renorm);

    getd("holder_h0", cfg.holder_h0);
    geti("holder_levels", 6, 60, cfg.holder_levels);
    gets("holder_target", cfg.holder_target);
    geti("uncertainty_count", 0, 10000, cfg.uncertainty_count);

    auto fail = [&](const char* key, const std::string& msg) {
        std::string loc;
        if (auto it = raw.find(key); it != raw.end()) loc = detail::where(it->second);
        throw ConfigError("key '" + std::string(key) + "': " + msg + loc);
    };

    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) fail("gamma", "gamma must lie in (0,1)");
    if (cfg.delta < 0.0) fail("delta", "delta must be >= 0");
    if (cfg.sigma < 0.0) fail("sigma", "sigma must be >= 0");
    for (double s : cfg.sigmas)
        if (s <= 0.0) fail("sigmas", "sigmas must be > 0");
    if (cfg.baseline != "mean" && cfg.baseline != "none")
        fail("baseline", "expected mean or none, got '" + cfg.baseline + "'");
    if (cfg.scan_radius <= 0.0) fail("scan_radius", "scan_radius must be > 0");
    if (cfg.scan_direction != "random" && cfg.scan_direction != "bias-asymmetry")
        fail("scan_direction", "expected random or bias-asymmetry");
    if ((cfg.grid_n & (cfg.grid_n - 1)) != 0) fail("grid_n", "grid_n must be a power of two");
    if (cfg.domain_l <= 0.0) fail("domain_l", "domain_l must be > 0");
    if (cfg.heat_time < 0.0) fail("heat_time", "heat_time must be >= 0");
    if (cfg.heat_method != "spectral" && cfg.heat_method != "direct")
        fail("heat_method", "expected spectral or direct");
    if (cfg.backward_t <= 0.0) fail("backward_t", "backward_t must be > 0");
    if (cfg.noise_eps < 0.0) fail("noise_eps", "noise_eps must be >= 0");
    if (cfg.probe_radius <= 0.0) fail("probe_radius", "probe_radius must be > 0");
    if (!(cfg.mle_delta0 >= 1e-9 && cfg.mle_delta0 <= 1e-5))
        fail("mle_delta0", "mle_delta0 must lie in [1e-9, 1e-5]");
    if (cfg.mle_steps < 10 * cfg.mle_renorm)
        fail("mle_steps", "mle_steps must be >= 10 * mle_renorm");
    if (cfg.holder_h0 <= 0.0) fail("holder_h0", "holder_h0 must be > 0");
    if (cfg.holder_target != "objective" && cfg.holder_target != "weierstrass")
        fail("holder_target", "expected objective or weierstrass");
    if (!cfg.s0.empty() &&
        static_cast<int>(cfg.s0.size()) != sysdyn::system_spec(cfg.system).state_dim)
        fail("s0", "s0 must have the system state dimension");
    if (cfg.init != "paper" && cfg.init != "lqr" && cfg.init != "zero" && cfg.init != "mlp" &&
        !std::filesystem::exists(cfg.init))
        fail("init", "expected paper, lqr, zero, mlp, or an existing checkpoint path; got '" +
                         cfg.init + "'");

    return cfg;
}

inline std::string manifest_string(const ExperimentConfig& c, bool with_timestamp = true) {
    auto list_d = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + g17(v[i]);
        return s;
    };
    std::string seeds;
    for (std::size_t i = 0; i < c.seeds.size(); ++i)
        seeds += (i ? "," : "") + std::to_string(c.seeds[i]);

    std::map<std::string, std::string> kv;
    kv["command"] = c.command;
    kv["system"] = sysdyn::system_name(c.system);
    kv["batch"] = std::to_string(c.batch);
    kv["epochs"] = std::to_string(c.epochs);
    kv["horizon"] = std::to_string(c.horizon);
    kv["gamma"] = g17(c.gamma);
    kv["delta"] = g17(c.delta);
    kv["sigma"] = g17(c.sigma);
    kv["sigmas"] = list_d(c.sigmas);
    kv["seeds"] = seeds;
    kv["init"] = c.init;
    kv["out"] = c.out_dir;
    kv["baseline"] = c.baseline;
    kv["svg"] = c.svg ? "true" : "false";
    kv["train_sigma"] = c.train_sigma ? "true" : "false";
    kv["return_to_go"] = c.return_to_go ? "true" : "false";
    kv["stochastic"] = c.stochastic ? "true" : "false";
    kv["s0"] = c.s0.empty() ? "default" : list_d(c.s0);
    kv["scan_points"] = std::to_string(c.scan_points);
    kv["scan_radius"] = g17(c.scan_radius);
    kv["scan_dims"] = std::to_string(c.scan_dims);
    kv["scan_direction"] = c.scan_direction;
    kv["grid_n"] = std::to_string(c.grid_n);
    kv["domain_l"] = g17(c.domain_l);
    kv["heat_time"] = g17(c.heat_time);
    kv["heat_times"] = std::to_string(c.heat_times);
    kv["heat_method"] = c.heat_method;
    kv["heat_alpha"] = g17(c.heat_alpha);
    kv["backward_t"] = g17(c.backward_t);
    kv["backward_kmax"] = std::to_string(c.backward_kmax);
    kv["noise_mode"] = std::to_string(c.noise_mode);
    kv["noise_eps"] = g17(c.noise_eps);
    kv["mc_samples"] = std::to_string(c.mc_samples);
    kv["probe_points"] = std::to_string(c.probe_points);
    kv["probe_radius"] = g17(c.probe_radius);
    kv["slice_horizon"] = std::to_string(c.slice_horizon);
    kv["mle_steps"] = std::to_string(c.mle_steps);
    kv["mle_delta0"] = g17(c.mle_delta0);
    kv["mle_renorm"] = std::to_string(c.mle_renorm);
    kv["holder_h0"] = g17(c.holder_h0);
    kv["holder_levels"] = std::to_string(c.holder_levels);
    kv["holder_target"] = c.holder_target;
    kv["uncertainty_count"] = std::to_string(c.uncertainty_count);

    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    if (with_timestamp) {
        char buf[64];
        const std::time_t now = std::time(nullptr);
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        out += std::string("timestamp=") + buf + "\n";
    }
    return out;
}

namespace detail {

inline policy::GaussianPolicy make_policy(const ExperimentConfig& cfg, const sysdyn::SystemSpec& sp,
                                          double sigma) {
    policy::MeanMap mm;
    if (cfg.init == "paper") {
        mm = policy::initial_mean_map(sp.kind);
    } else if (cfg.init == "zero") {
        mm = policy::linear_map(sp.state_dim, sp.control_dim,
                                std::vector<double>(static_cast<std::size_t>(sp.state_dim) *
                                                        sp.control_dim,
                                                    0.0),
                                std::vector<double>(sp.control_dim, 0.0));
    } else if (cfg.init == "mlp") {
        // 2-layer tanh network, hidden width 16, seeded from the run seed
        RngStream rng(mix_seed(cfg.seeds[0], 0x317, 0));
        mm = policy::mlp_map_random(sp.state_dim, sp.control_dim, 16, rng);
    } else if (cfg.init == "lqr") {
        StateVector s_star(sp.state_dim, 0.0);
        ControlVector u_star = sp.kind == sysdyn::SystemKind::PlanarQuadrotor
                                   ? policy::quadrotor_initial_bias()
                                   : ControlVector{0.0, 0.0};
        const riccati::LinearModel model = riccati::linearize(sp, s_star, u_star);
        const riccati::DareSolution sol =
            riccati::dare_solve(model, riccati::reward_weights(sp.kind), cfg.gamma);
        return riccati::lqr_policy(sp, model, sol, sigma);
    } else {
        policy::GaussianPolicy loaded = policy::load_checkpoint(cfg.init);
        mm = loaded.mean;
        if (sigma <= 0.0 && loaded.noise == policy::NoiseKind::Isotropic) sigma = loaded.sigma;
    }
    policy::GaussianPolicy p = sigma > 0.0
                                   ? policy::isotropic_policy(std::move(mm), sigma, cfg.train_sigma)
                                   : policy::deterministic_policy(std::move(mm));
    return p;
}

inline objective::RolloutConfig make_rollout_config(const ExperimentConfig& cfg) {
    objective::RolloutConfig rc = objective::default_rollout_config(cfg.system);
    rc.horizon = cfg.horizon;
    rc.gamma = cfg.gamma;
    if (!cfg.s0.empty()) rc.s0 = cfg.s0;
    return rc;
}

/// Unit direction in parameter space that splits the two bias entries of a
/// linear policy, (e_b1 - e_b2)/sqrt(2); the quadrotor spike direction.
inline probe::ParamVector bias_asymmetry_direction(const policy::GaussianPolicy& p) {
    if (p.mean.kind != policy::MeanMap::Kind::Linear || !p.mean.has_bias)
        throw std::runtime_error("bias-asymmetry direction needs a linear policy with a bias");
    probe::ParamVector d(policy::param_count(p), 0.0);
    const std::size_t off = static_cast<std::size_t>(p.mean.m) * p.mean.n;
    const double inv = 1.0 / std::sqrt(2.0);
    d[off] = inv;
    d[off + 1] = -inv;
    return d;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

inline void emit(const std::filesystem::path& dir, const std::string& name,
                 const std::string& content) {
    write_text_file(dir / name, content);
}

}  // namespace detail

// --- subcommand bodies ---

inline void run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const sysdyn::SystemSpec sp = sysdyn::system_spec(cfg.system);
    objective::RolloutConfig rc = detail::make_rollout_config(cfg);
    rc.stochastic = cfg.stochastic;
    const policy::GaussianPolicy p =
        detail::make_policy(cfg, sp, cfg.stochastic ? cfg.sigma : 0.0);
    RngStream rng(mix_seed(cfg.seeds[0], 0, 0));
    const objective::Trajectory traj =
        objective::rollout(sp, p, rc, cfg.stochastic ? &rng : nullptr);
    detail::emit(dir, "trajectory.csv", objective::trajectory_csv(traj));
    std::cout << "return " << g17(traj.return_) << (traj.diverged ? " (diverged)" : "") << "\n";
    if (cfg.svg) {
        std::vector<double> ks(traj.steps.size());
        std::vector<std::vector<double>> series(sp.state_dim,
                                                std::vector<double>(traj.steps.size()));
        for (std::size_t k = 0; k < traj.steps.size(); ++k) {
            ks[k] = static_cast<double>(k);
            for (int i = 0; i < sp.state_dim; ++i) series[i][k] = traj.steps[k].state[i];
        }
        detail::emit(dir, "trajectory.svg", svg_polyline_chart(ks, series, "state trajectory"));
    }
}

inline void run_train(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const sysdyn::SystemSpec sp = sysdyn::system_spec(cfg.system);
    const objective::RolloutConfig rc = detail::make_rollout_config(cfg);
    std::vector<std::vector<double>> curves;
    for (const std::uint64_t seed : cfg.seeds) {
        policy::GaussianPolicy p = detail::make_policy(cfg, sp, cfg.sigma);
        pgrad::PgConfig pg;
        pg.batch = cfg.batch;
        pg.epochs = cfg.epochs;
        pg.delta = cfg.delta;
        pg.seed = seed;
        pg.baseline = cfg.baseline == "mean" ? pgrad::Baseline::BatchMean : pgrad::Baseline::None;
        pg.return_to_go = cfg.return_to_go;
        const pgrad::TrainRecord rec = pgrad::train(sp, p, rc, pg);
        detail::emit(dir, "train_seed" + std::to_string(seed) + ".csv",
                     pgrad::train_record_csv(rec, seed, cfg.sigma));
        std::vector<double> curve;
        for (const auto& row : rec.epochs) curve.push_back(row.j_det);
        curves.push_back(std::move(curve));

        policy::GaussianPolicy final_p = p;
        policy::unpack(final_p, rec.epochs.back().theta);
        policy::save_checkpoint(final_p, (dir / ("policy_seed" + std::to_string(seed) + ".txt")).string());
    }
    if (cfg.svg) {
        std::vector<double> xs(cfg.epochs + 1);
        for (int e = 0; e <= cfg.epochs; ++e) xs[e] = e;
        detail::emit(dir, "train.svg", svg_polyline_chart(xs, curves, "J_det per epoch"));
    }
}

inline void run_scan(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool action_space) {
    const sysdyn::SystemSpec sp = sysdyn::system_spec(cfg.system);
    const objective::RolloutConfig rc = detail::make_rollout_config(cfg);
    const policy::GaussianPolicy base = detail::make_policy(cfg, sp, 0.0);
    const std::vector<double> offsets =
        detail::linspace(-cfg.scan_radius, cfg.scan_radius, cfg.scan_points);
    RngStream dir_rng(mix_seed(cfg.seeds[0], 0xd1, 0));

    probe::ScanGrid grid;
    if (action_space) {
        // Q-landscape around the mean action at s0
        const ControlVector a0 = policy::mean_action(base, rc.s0);
        std::vector<probe::ParamVector> dirs;
        dirs.push_back({1.0, 0.0});
        if (cfg.scan_dims == 2) dirs.push_back({0.0, 1.0});
        auto eval = [&](const probe::ParamVector& a) {
            return objective::q_value(sp, base, rc.s0, a, rc);
        };
        grid = cfg.scan_dims == 2
                   ? probe::scan(eval, probe::ParamVector(a0.begin(), a0.end()), dirs, offsets, offsets)
                   : probe::scan(eval, probe::ParamVector(a0.begin(), a0.end()), dirs, offsets);
    } else {
        const probe::ParamVector center = policy::pack(base);
        std::vector<probe::ParamVector> dirs;
        if (cfg.scan_direction == "bias-asymmetry") {
            dirs.push_back(detail::bias_asymmetry_direction(base));
        } else {
            dirs.push_back(probe::random_unit_direction(center.size(), dir_rng));
        }
        if (cfg.scan_dims == 2) {
            probe::ParamVector d2 = probe::random_unit_direction(center.size(), dir_rng);
            double proj = 0.0;  // Gram-Schmidt against the first direction
            for (std::size_t i = 0; i < d2.size(); ++i) proj += d2[i] * dirs[0][i];
            double norm2 = 0.0;
            for (std::size_t i = 0; i < d2.size(); ++i) {
                d2[i] -= proj * dirs[0][i];
                norm2 += d2[i] * d2[i];
            }
            for (auto& v : d2) v /= std::sqrt(norm2);
            dirs.push_back(std::move(d2));
        }
        auto eval = [&](const probe::ParamVector& theta) {
            policy::GaussianPolicy p = base;
            policy::unpack(p, theta);
            return objective::rollout_return(sp, p, rc);
        };
        grid = cfg.scan_dims == 2 ? probe::scan(eval, center, dirs, offsets, offsets)
                                  : probe::scan(eval, center, dirs, offsets);
    }
    detail::emit(dir, action_space ? "qscan.csv" : "scan.csv", probe::scan_csv(grid));
    if (cfg.svg) {
        if (grid.two_d()) {
            std::vector<std::vector<double>> rows(grid.offsets1.size());
            for (std::size_t i = 0; i < grid.offsets1.size(); ++i)
                rows[i].assign(grid.values.begin() + i * grid.offsets2.size(),
                               grid.values.begin() + (i + 1) * grid.offsets2.size());
            detail::emit(dir, action_space ? "qscan.svg" : "scan.svg",
                         svg_heatmap(rows, "landscape"));
        } else {
            detail::emit(dir, action_space ? "qscan.svg" : "scan.svg",
                         svg_polyline_chart(grid.offsets1, {grid.values}, "landscape"));
        }
    }
}

inline void run_mollify(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const sysdyn::SystemSpec sp = sysdyn::system_spec(cfg.system);
    objective::RolloutConfig rc = detail::make_rollout_config(cfg);
    rc.horizon = cfg.slice_horizon;
    const policy::GaussianPolicy base = detail::make_policy(cfg, sp, 0.0);
    const ControlVector a0 = policy::mean_action(base, rc.s0);

    auto slice = [&](double xi) {
        ControlVector a = a0;
        a[0] += xi;
        return objective::q_value(sp, base, rc.s0, a, rc);
    };

    double sigma_max = 0.0;
    for (double s : cfg.sigmas) sigma_max = std::max(sigma_max, s);
    const double half_width = 4.0 * (cfg.probe_radius + 4.0 * sigma_max);
    const heatlab::Field1D sampled =
        heatlab::make_field(half_width, cfg.grid_n, [&](double x) { return slice(x); });

    std::string csv = "mu,sigma,mc,mc_se,heat\n";
    const std::vector<double> mus =
        detail::linspace(-cfg.probe_radius, cfg.probe_radius, cfg.probe_points);
    for (double sigma : cfg.sigmas) {
        const heatlab::SpectralCoeffs heated = [&] {
            heatlab::SpectralCoeffs sc = heatlab::spectrum(sampled);
            for (int k = sc.k_min(); k < -sc.k_min(); ++k) {
                const double w = sc.omega(k);
                sc.at_mode(k) *= std::exp(-0.5 * w * w * sigma * sigma);
            }
            return sc;
        }();
        for (std::size_t i = 0; i < mus.size(); ++i) {
            RngStream rng(mix_seed(cfg.seeds[0], static_cast<std::uint64_t>(sigma * 1e6),
                                   static_cast<std::uint64_t>(i)));
            const auto [mc, se] =
                heatlab::mollify_mc([&](const std::vector<double>& z) { return slice(z[0]); },
                                    {mus[i]}, sigma, static_cast<std::size_t>(cfg.mc_samples), rng);
            const double heat = heatlab::eval_series(heated, mus[i]);
            csv += g17(mus[i]) + "," + g17(sigma) + "," + g17(mc) + "," + g17(se) + "," +
                   g17(heat) + "\n";
        }
    }
    detail::emit(dir, "mollify.csv", csv);
}

inline void run_heat(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const heatlab::Field1D g =
        heatlab::weierstrass_field_for_grid(cfg.domain_l, cfg.grid_n, cfg.heat_alpha);
    std::vector<double> times(cfg.heat_times);
    for (int j = 0; j < cfg.heat_times; ++j) {
        const double frac = static_cast<double>(j) / (cfg.heat_times - 1);
        times[j] = cfg.heat_time * frac * frac;  // refine near t = 0
    }
    const heatlab::HeatMethod method = cfg.heat_method == "spectral"
                                           ? heatlab::HeatMethod::Spectral
                                           : heatlab::HeatMethod::Direct;
    const heatlab::HeatField h = heatlab::make_heat_field(g, times, method);
    detail::emit(dir, "heatfield.csv", heatlab::heat_field_csv(h));
    const heatlab::MaxPrincipleReport rep = heatlab::max_principle_probe(h);
    std::cout << "max_principle " << (rep.pass ? "pass" : "fail") << " worst_violation "
              << g17(rep.worst_violation) << "\n";
    if (cfg.svg) detail::emit(dir, "heatfield.svg", svg_heatmap(h.values, "u(x, t)"));
}

inline void run_backward(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    using std::numbers::pi;
    const double L = cfg.domain_l;
    const heatlab::Field1D g = heatlab::make_field(L, cfg.grid_n, [&](double x) {
        return std::sin(pi * x / L) + 0.5 * std::sin(2.0 * pi * x / L);
    });
    heatlab::Field1D g_T = heatlab::heat_forward(g, cfg.backward_t);
    if (cfg.noise_mode > 0) {
        for (int i = 0; i < g_T.size(); ++i)
            g_T.samples[i] += cfg.noise_eps * std::sin(cfg.noise_mode * pi * g_T.x(i) / L);
    }
    const heatlab::BackwardResult res =
        heatlab::backward_attempt(g_T, cfg.backward_t, cfg.backward_kmax);
    detail::emit(dir, "amplification.csv", heatlab::amplification_csv(res.report));
    if (cfg.svg) {
        std::vector<double> xs(res.field.size());
        for (int i = 0; i < res.field.size(); ++i) xs[i] = res.field.x(i);
        detail::emit(dir, "backward.svg",
                     svg_polyline_chart(xs, {g.samples, g_T.samples, res.field.samples},
                                        "g, g_T, reconstruction"));
    }
}

inline void run_uncertainty(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const double L = std::max(cfg.domain_l, 8.0);
    const int n = cfg.grid_n;
    std::string csv = "case,Vx,Vxi,product\n";
    auto add = [&](const std::string& name, const heatlab::Field1D& phi) {
        const heatlab::UncertaintyResult r = heatlab::uncertainty_product(phi);
        csv += name + "," + g17(r.spatial_variance) + "," + g17(r.frequency_variance) + "," +
               g17(r.product) + "\n";
    };
    auto normalized = [&](auto&& fn) {
        heatlab::Field1D f = heatlab::make_field(L, n, fn);
        double nrm = 0.0;
        for (double v : f.samples) nrm += v * v;
        nrm = std::sqrt(nrm * f.dx());
        for (double& v : f.samples) v /= nrm;
        return f;
    };
    using std::numbers::pi;
    add("gaussian", normalized([](double x) { return std::exp(-pi * x * x); }));
    add("gaussian_dilated", normalized([](double x) { return std::exp(-pi * x * x / 2.25); }));
    add("hermite1", normalized([](double x) { return x * std::exp(-pi * x * x); }));
    RngStream rng(mix_seed(cfg.seeds[0], 0xabc, 0));
    for (int c = 0; c < cfg.uncertainty_count; ++c) {
        double c0 = rng.normal(), c1 = rng.normal(), c2 = rng.normal(), c3 = rng.normal();
        add("random" + std::to_string(c), normalized([&](double x) {
                return (c0 + c1 * x + c2 * x * x + c3 * std::sin(x)) * std::exp(-0.5 * x * x);
            }));
    }
    detail::emit(dir, "uncertainty.csv", csv);
}

inline void run_mle(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const sysdyn::SystemSpec sp = sysdyn::system_spec(cfg.system);
    const objective::RolloutConfig rc = detail::make_rollout_config(cfg);
    const policy::GaussianPolicy p = detail::make_policy(cfg, sp, 0.0);
    const probe::MleResult res =
        probe::mle_estimate(sp, p, rc.s0, cfg.mle_steps, cfg.mle_delta0, cfg.mle_renorm);
    detail::emit(dir, "mle.csv", probe::mle_csv({{sysdyn::system_name(cfg.system), res}}));
    std::cout << "lambda " << g17(res.lambda) << "\n";
}

inline void run_holder(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const std::vector<double> offsets = probe::dyadic_offsets(cfg.holder_h0, cfg.holder_levels);
    probe::ScanGrid grid;
    if (cfg.holder_target == "weierstrass") {
        const double x0 = 0.3127;
        grid = probe::scan(
            [&](const probe::ParamVector& th) { return heatlab::weierstrass(th[0], cfg.heat_alpha); },
            {x0}, {{1.0}}, offsets);
    } else {
        const sysdyn::SystemSpec sp = sysdyn::system_spec(cfg.system);
        const objective::RolloutConfig rc = detail::make_rollout_config(cfg);
        const policy::GaussianPolicy base = detail::make_policy(cfg, sp, 0.0);
        const probe::ParamVector center = policy::pack(base);
        RngStream rng(mix_seed(cfg.seeds[0], 0x601d, 0));
        const probe::ParamVector d = probe::random_unit_direction(center.size(), rng);
        grid = probe::scan(
            [&](const probe::ParamVector& theta) {
                policy::GaussianPolicy p = base;
                policy::unpack(p, theta);
                return objective::rollout_return(sp, p, rc);
            },
            center, {d}, offsets);
    }
    std::string csv = "j,h,increment\n";
    for (std::size_t j = 1; j < grid.offsets1.size(); ++j)
        csv += std::to_string(j - 1) + "," + g17(grid.offsets1[j]) + "," +
               g17(std::abs(grid.values[j] - grid.values[0])) + "\n";
    detail::emit(dir, "holder_scales.csv", csv);
    const probe::HolderFit fit = probe::holder_estimate(grid);
    detail::emit(dir, "holder_fit.csv",
                 "alpha,residual,scales\n" + g17(fit.alpha) + "," + g17(fit.residual) + "," +
                     std::to_string(fit.scales_used) + "\n");
    std::cout << "alpha " << g17(fit.alpha) << "\n";
}

inline void run_lqr(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const sysdyn::SystemSpec sp = sysdyn::system_spec(cfg.system);
    const StateVector s_star(sp.state_dim, 0.0);
    const ControlVector u_star = sp.kind == sysdyn::SystemKind::PlanarQuadrotor
                                     ? policy::quadrotor_initial_bias()
                                     : ControlVector{0.0, 0.0};
    const riccati::LinearModel model = riccati::linearize(sp, s_star, u_star);
    const riccati::DareSolution sol =
        riccati::dare_solve(model, riccati::reward_weights(sp.kind), cfg.gamma);
    const policy::GaussianPolicy gain = riccati::lqr_policy(sp, model, sol);
    detail::emit(dir, "lqr_gain.txt", policy::checkpoint_string(gain));
    std::cout << "dare iterations " << sol.iterations << " spectral_radius "
              << g17(riccati::spectral_radius(model.A - model.B * sol.K)) << "\n";
}

inline void run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const sysdyn::SystemSpec sp = sysdyn::system_spec(cfg.system);
    const objective::RolloutConfig rc = detail::make_rollout_config(cfg);
    std::string summary = "sigma,seed,j_std\n";
    for (const double sigma : cfg.sigmas) {
        for (const std::uint64_t seed : cfg.seeds) {
            policy::GaussianPolicy p = detail::make_policy(cfg, sp, sigma);
            pgrad::PgConfig pg;
            pg.batch = cfg.batch;
            pg.epochs = cfg.epochs;
            pg.delta = cfg.delta;
            pg.seed = seed;
            pg.baseline =
                cfg.baseline == "mean" ? pgrad::Baseline::BatchMean : pgrad::Baseline::None;
            pg.return_to_go = cfg.return_to_go;
            const pgrad::TrainRecord rec = pgrad::train(sp, p, rc, pg);
            detail::emit(dir, "train_sigma" + g17(sigma) + "_seed" + std::to_string(seed) + ".csv",
                         pgrad::train_record_csv(rec, seed, sigma));
            double mean = 0.0;
            for (const auto& row : rec.epochs) mean += row.j_det;
            mean /= rec.epochs.size();
            double ss = 0.0;
            for (const auto& row : rec.epochs) ss += (row.j_det - mean) * (row.j_det - mean);
            summary += g17(sigma) + "," + std::to_string(seed) + "," +
                       g17(std::sqrt(ss / (rec.epochs.size() - 1))) + "\n";
        }
    }
    detail::emit(dir, "sweep_summary.csv", summary);
}

/// Dispatches a validated config, creating the output directory and writing
/// a manifest with the full resolved configuration.
inline int run(const ExperimentConfig& cfg) {
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    write_text_file(dir / "manifest.txt", manifest_string(cfg));

    if (cfg.command == "simulate") run_simulate(cfg, dir);
    else if (cfg.command == "train") run_train(cfg, dir);
    else if (cfg.command == "scan") run_scan(cfg, dir, false);
    else if (cfg.command == "qscan") run_scan(cfg, dir, true);
    else if (cfg.command == "mollify") run_mollify(cfg, dir);
    else if (cfg.command == "heat") run_heat(cfg, dir);
    else if (cfg.command == "backward") run_backward(cfg, dir);
    else if (cfg.command == "uncertainty") run_uncertainty(cfg, dir);
    else if (cfg.command == "mle") run_mle(cfg, dir);
    else if (cfg.command == "holder") run_holder(cfg, dir);
    else if (cfg.command == "lqr") run_lqr(cfg, dir);
    else if (cfg.command == "sweep") run_sweep(cfg, dir);
    else throw ConfigError("unknown command '" + cfg.command + "'");
    return 0;
}

inline const char* usage_text() {
    return "usage: mollikit <command> [--config FILE] [--key value ...]\n"
           "commands: simulate train scan qscan mollify heat backward uncertainty\n"
           "          mle holder lqr sweep\n"
           "Keys mirror the config file (key=value per line, # comments); flags\n"
           "override file entries. See README.md for the full key list.\n";
}

/// CLI entry point: subcommand plus `--key value` flags (`--config FILE`
/// reads a key=value file first; bare boolean flags mean true).
inline int main(int argc, char** argv) {
    try {
        if (argc < 2) {
            std::cerr << usage_text();
            return 2;
        }
        const std::string command = argv[1];
        if (command == "--help" || command == "-h" || command == "help") {
            std::cout << usage_text();
            return 0;
        }
        std::string config_path;
        std::vector<std::pair<std::string, std::string>> flags;
        static const std::set<std::string> bare_bools = {"svg", "train_sigma", "return_to_go",
                                                         "stochastic"};
        for (int i = 2; i < argc; ++i) {
            std::string arg = argv[i];
            if (arg.rfind("--", 0) != 0) {
                std::cerr << "unexpected argument '" << arg << "'\n";
                return 2;
            }
            arg = arg.substr(2);
            std::replace(arg.begin(), arg.end(), '-', '_');
            std::string value;
            if (i + 1 < argc && std::string(argv[i + 1]).rfind("--", 0) != 0) {
                value = argv[++i];
            } else if (bare_bools.count(arg)) {
                value = "true";
            } else {
                std::cerr << "flag --" << arg << " needs a value\n";
                return 2;
            }
            if (arg == "config")
                config_path = value;
            else
                flags.emplace_back(arg, value);
        }
        const ExperimentConfig cfg = parse_config(command, config_path, flags);
        return run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace mollikit::runner
