#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mollikit/csv.hpp"
#include "mollikit/parallel.hpp"
#include "mollikit/rng.hpp"

namespace mollikit::heatlab {

/// Scalar field sampled on a uniform grid over the periodic domain [-L, L).
/// N must be a power of two and at least 8.
struct Field1D {
    double half_width = 0.0;  ///< L
    std::vector<double> samples;

    int size() const { return static_cast<int>(samples.size()); }
    double dx() const { return 2.0 * half_width / size(); }
    double x(int i) const { return -half_width + i * dx(); }
};

inline void validate_field(const Field1D& f, const char* where) {
    const int n = f.size();
    if (n < 8 || (n & (n - 1)) != 0)
        throw std::invalid_argument(std::string(where) + ": grid size must be a power of two >= 8");
    if (!(f.half_width > 0.0))
        throw std::invalid_argument(std::string(where) + ": domain half-width must be > 0");
    for (double v : f.samples)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(where) + ": non-finite sample");
}

template <class Fn>
inline Field1D make_field(double half_width, int n, Fn&& fn) {
    Field1D f;
    f.half_width = half_width;
    f.samples.resize(n);
    for (int i = 0; i < n; ++i) f.samples[i] = fn(f.x(i));
    validate_field(f, "make_field");
    return f;
}

namespace detail {

/// In-place iterative radix-2 FFT; inverse applies the 1/N factor.
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& z : a) z /= static_cast<double>(n);
}

inline int signed_wavenumber(std::size_t idx, std::size_t n) {
    return idx < n / 2 ? static_cast<int>(idx) : static_cast<int>(idx) - static_cast<int>(n);
}

}  // namespace detail

/// Fourier-series coefficients B_k of g(x) = sum_k B_k e^{i k pi x / L},
/// k = -N/2 .. N/2-1. coeff[j] stores B_{j - N/2}.
struct SpectralCoeffs {
    double half_width = 0.0;
    std::vector<std::complex<double>> coeff;

    int size() const { return static_cast<int>(coeff.size()); }
    int k_min() const { return -size() / 2; }
    const std::complex<double>& at_mode(int k) const { return coeff[k + size() / 2]; }
    std::complex<double>& at_mode(int k) { return coeff[k + size() / 2]; }
    double omega(int k) const { return std::numbers::pi * k / half_width; }
};

inline SpectralCoeffs spectrum(const Field1D& g) {
    validate_field(g, "spectrum");
    const int n = g.size();
    std::vector<std::complex<double>> a(g.samples.begin(), g.samples.end());
    detail::fft(a, false);
    SpectralCoeffs sc;
    sc.half_width = g.half_width;
    sc.coeff.resize(n);
    for (int j = 0; j < n; ++j) {
        const int k = detail::signed_wavenumber(j, n);
        // grid starts at x = -L, hence the (-1)^k phase
        const double phase = (k & 1) ? -1.0 : 1.0;
        sc.at_mode(k) = phase * a[j] / static_cast<double>(n);
    }
    return sc;
}

inline Field1D synthesize(const SpectralCoeffs& sc) {
    const int n = sc.size();
    std::vector<std::complex<double>> a(n);
    for (int j = 0; j < n; ++j) {
        const int k = detail::signed_wavenumber(j, n);
        const double phase = (k & 1) ? -1.0 : 1.0;
        a[j] = phase * sc.at_mode(k) * static_cast<double>(n);
    }
    detail::fft(a, true);
    Field1D f;
    f.half_width = sc.half_width;
    f.samples.resize(n);
    for (int j = 0; j < n; ++j) f.samples[j] = a[j].real();
    return f;
}

/// Exact point evaluation of the truncated Fourier series.
inline double eval_series(const SpectralCoeffs& sc, double x) {
    std::complex<double> acc(0.0, 0.0);
    for (int k = sc.k_min(); k < -sc.k_min(); ++k) {
        const double w = sc.omega(k);
        acc += sc.at_mode(k) * std::complex<double>(std::cos(w * x), std::sin(w * x));
    }
    return acc.real();
}

enum class HeatMethod { Spectral, Direct };

/// Solves 2 u_t - u_xx = 0 forward to time t: the variance-t heat kernel,
/// i.e. the Fourier multiplier e^{-omega^2 t / 2}.
inline Field1D heat_forward(const Field1D& g, double t, HeatMethod method = HeatMethod::Spectral) {
    validate_field(g, "heat_forward");
    if (t < 0.0) throw std::invalid_argument("heat_forward: t must be >= 0");
    if (t == 0.0) return g;
    const int n = g.size();

    if (method == HeatMethod::Spectral) {
        std::vector<std::complex<double>> a(g.samples.begin(), g.samples.end());
        detail::fft(a, false);
        for (int j = 0; j < n; ++j) {
            const int k = detail::signed_wavenumber(j, n);
            const double w = std::numbers::pi * k / g.half_width;
            a[j] *= std::exp(-0.5 * w * w * t);
        }
        detail::fft(a, true);
        Field1D out;
        out.half_width = g.half_width;
        out.samples.resize(n);
        for (int j = 0; j < n; ++j) out.samples[j] = a[j].real();
        return out;
    }

    // direct convolution with the sampled Gaussian, truncated at 8 sqrt(t)
    const double dx = g.dx();
    int radius = static_cast<int>(std::floor(8.0 * std::sqrt(t) / dx));
    radius = std::min(radius, n / 2);
    std::vector<double> w(2 * radius + 1);
    double mass = 0.0;
    for (int r = -radius; r <= radius; ++r) {
        const double y = r * dx;
        w[r + radius] = std::exp(-y * y / (2.0 * t));
        mass += w[r + radius];
    }
    for (auto& v : w) v /= mass;
    Field1D out;
    out.half_width = g.half_width;
    out.samples.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int r = -radius; r <= radius; ++r) {
            int j = (i - r) % n;
            if (j < 0) j += n;
            acc += w[r + radius] * g.samples[j];
        }
        out.samples[i] = acc;
    }
    return out;
}

struct ModeAmplification {
    int k = 0;
    double omega = 0.0;
    double factor = 0.0;
};

struct BackwardResult {
    Field1D field;
    std::vector<ModeAmplification> report;  ///< retained modes k = 0..k_max
};

/// Raised when a backward multiplier exceeds 1e300; carries the first
/// offending wavenumber. This is the ill-posedness exhibit.
class BackwardOverflowError : public std::runtime_error {
public:
    BackwardOverflowError(int mode, double exponent)
        : std::runtime_error("backward_attempt: amplification e^" + g17(exponent) +
                             " at mode k=" + std::to_string(mode) +
                             " exceeds 1e300; the backward problem is ill-posed"),
          mode_(mode) {}
    int mode() const { return mode_; }

private:
    int mode_;
};

/// Spectral time reversal: B_k <- B_k e^{+omega_k^2 t / 2} for |k| <= k_max,
/// zero above the cutoff. Reports the amplification factor per retained mode.
inline BackwardResult backward_attempt(const Field1D& g_T, double t, int k_max) {
    validate_field(g_T, "backward_attempt");
    if (!(t > 0.0)) throw std::invalid_argument("backward_attempt: t must be > 0");
    if (k_max < 0) throw std::invalid_argument("backward_attempt: k_max must be >= 0");
    SpectralCoeffs sc = spectrum(g_T);
    const int n = sc.size();
    k_max = std::min(k_max, n / 2);

    BackwardResult res;
    res.report.reserve(k_max + 1);
    for (int k = 0; k <= k_max; ++k) {
        const double w = sc.omega(k);
        const double expo = 0.5 * w * w * t;
        if (expo > std::log(1e300)) throw BackwardOverflowError(k, expo);
        res.report.push_back({k, w, std::exp(expo)});
    }
    for (int k = sc.k_min(); k < -sc.k_min(); ++k) {
        const int ak = std::abs(k);
        if (ak > k_max) {
            sc.at_mode(k) = 0.0;
        } else {
            sc.at_mode(k) *= res.report[ak].factor;
        }
    }
    res.field = synthesize(sc);
    return res;
}

/// Monte Carlo mollification: mean of f(mu + sigma z) over n standard normal
/// draws, with the standard error of the mean. The draws come sequentially
/// from the stream; only the f evaluations run in parallel, so the result is
/// identical at any worker count.
template <class F>
inline std::pair<double, double> mollify_mc(F&& f, const std::vector<double>& mu, double sigma,
                                            std::size_t n, RngStream& rng) {
    if (!(sigma > 0.0)) throw std::invalid_argument("mollify_mc: sigma must be > 0");
    if (n < 2) throw std::invalid_argument("mollify_mc: need at least 2 samples");
    const std::size_t m = mu.size();

    std::vector<double> points(n * m);
    for (std::size_t i = 0; i < n * m; ++i)
        points[i] = mu[i % m] + sigma * rng.normal();

    std::vector<double> values(n);
    std::vector<int> bad(n, 0);
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> arg(points.begin() + i * m, points.begin() + (i + 1) * m);
        const double v = f(arg);
        values[i] = v;
        bad[i] = std::isfinite(v) ? 0 : 1;
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (bad[i]) {
            std::string pt;
            for (std::size_t d = 0; d < m; ++d) pt += (d ? "," : "") + g17(points[i * m + d]);
            throw std::runtime_error("mollify_mc: f returned a non-finite value at (" + pt + ")");
        }
    }

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ssq = 0.0;
    for (double v : values) ssq += (v - mean) * (v - mean);
    const double se = std::sqrt(ssq / (static_cast<double>(n) * (static_cast<double>(n) - 1.0)));
    return {mean, se};
}

/// Compactly supported mollifier eta_sigma(y) = C exp(1/(y^2 - sigma^2)) on
/// (-sigma, sigma), C fixed by the same quadrature so the discrete kernel has
/// unit mass exactly. Composite midpoint rule with mirrored nodes.
template <class F>
inline double bump_mollify(F&& f, double x, double sigma, int quad_points) {
    if (!(sigma > 0.0)) throw std::invalid_argument("bump_mollify: sigma must be > 0");
    if (quad_points < 64) throw std::invalid_argument("bump_mollify: need at least 64 quadrature points");
    const int q = quad_points + (quad_points & 1);
    const double h = 2.0 * sigma / q;

    std::vector<double> nodes(q);
    for (int i = 0; i < q / 2; ++i) {
        const double y = -sigma + h * (i + 0.5);
        nodes[i] = y;
        nodes[q - 1 - i] = -y;
    }
    double mass = 0.0, acc = 0.0;
    std::vector<double> kern(q);
    for (int i = 0; i < q; ++i) {
        kern[i] = std::exp(1.0 / (nodes[i] * nodes[i] - sigma * sigma));
        mass += kern[i];
    }
    for (int i = 0; i < q; ++i) acc += kern[i] * f(x - nodes[i]);
    return acc / mass;
}

struct UncertaintyResult {
    double spatial_variance = 0.0;    ///< integral of x^2 |phi|^2
    double frequency_variance = 0.0;  ///< integral of xi^2 |phi_hat|^2
    double product = 0.0;
};

/// Second-moment uncertainty functional with the 2*pi-in-exponent Fourier
/// convention, for which the Gaussian equality constant is 1/(16 pi^2).
/// Requires unit L2 norm (within 1e-8) and decay below 1e-10 at the edges.
inline UncertaintyResult uncertainty_product(const Field1D& phi) {
    validate_field(phi, "uncertainty_product");
    const int n = phi.size();
    const double dx = phi.dx();
    const double L = phi.half_width;

    double norm2 = 0.0;
    for (double v : phi.samples) norm2 += v * v;
    norm2 *= dx;
    if (std::abs(norm2 - 1.0) > 1e-8)
        throw std::invalid_argument("uncertainty_product: phi must have unit L2 norm, got " +
                                    g17(norm2));
    if (std::abs(phi.samples.front()) >= 1e-10 || std::abs(phi.samples.back()) >= 1e-10)
        throw std::invalid_argument("uncertainty_product: phi must decay below 1e-10 at the domain edge");

    UncertaintyResult res;
    for (int i = 0; i < n; ++i) {
        const double x = phi.x(i);
        res.spatial_variance += x * x * phi.samples[i] * phi.samples[i] * dx;
    }

    std::vector<std::complex<double>> a(phi.samples.begin(), phi.samples.end());
    detail::fft(a, false);
    const double dxi = 1.0 / (2.0 * L);
    for (int j = 0; j < n; ++j) {
        const int l = detail::signed_wavenumber(j, n);
        const double xi = l * dxi;
        const double mag = std::abs(a[j]) * dx;  // continuous transform approximation
        res.frequency_variance += xi * xi * mag * mag * dxi;
    }
    res.product = res.spatial_variance * res.frequency_variance;
    return res;
}

/// Field stacked over diffusion times t = sigma^2.
struct HeatField {
    Field1D base;
    std::vector<double> times;
    std::vector<std::vector<double>> values;  ///< times x N
};

inline HeatField make_heat_field(const Field1D& g, std::vector<double> times,
                                 HeatMethod method = HeatMethod::Spectral) {
    if (times.empty() || times.front() != 0.0)
        throw std::invalid_argument("make_heat_field: time grid must start at t = 0");
    for (std::size_t j = 1; j < times.size(); ++j)
        if (times[j] <= times[j - 1])
            throw std::invalid_argument("make_heat_field: times must be ascending");
    HeatField h;
    h.base = g;
    h.times = std::move(times);
    h.values.reserve(h.times.size());
    for (double t : h.times) h.values.push_back(heat_forward(g, t, method).samples);
    return h;
}

struct MaxPrincipleReport {
    bool pass = false;
    double worst_violation = 0.0;  ///< max of the boundary and interior excesses
    double boundary_excess = 0.0;  ///< global max minus parabolic-boundary max
    double interior_excess = 0.0;  ///< worst node excess over its (i+-1, j), (i, j-1) stencil
    int worst_node = -1;
    int worst_time = -1;
};

/// Checks the discrete strong-maximum-principle statements: (a) the global
/// max is attained on the parabolic boundary ({t=0} plus spatial edges)
/// within 1e-8, and (b) no interior node exceeds max(u[i-1,j], u[i+1,j],
/// u[i,j-1]) by more than 1e-10.
inline MaxPrincipleReport max_principle_probe(const HeatField& h) {
    const int T = static_cast<int>(h.times.size());
    const int N = h.base.size();
    MaxPrincipleReport rep;

    double global = -1e308, boundary = -1e308;
    for (int j = 0; j < T; ++j)
        for (int i = 0; i < N; ++i) {
            const double v = h.values[j][i];
            global = std::max(global, v);
            if (j == 0 || i == 0 || i == N - 1) boundary = std::max(boundary, v);
        }
    rep.boundary_excess = global - boundary;

    for (int j = 1; j < T; ++j) {
        for (int i = 1; i + 1 < N; ++i) {
            const double nb = std::max({h.values[j][i - 1], h.values[j][i + 1], h.values[j - 1][i]});
            const double excess = h.values[j][i] - nb;
            if (excess > rep.interior_excess) {
                rep.interior_excess = excess;
                rep.worst_node = i;
                rep.worst_time = j;
            }
        }
    }
    rep.worst_violation = std::max(rep.boundary_excess, rep.interior_excess);
    rep.pass = rep.boundary_excess <= 1e-8 && rep.interior_excess <= 1e-10;
    return rep;
}

/// Truncated Weierstrass sum W(x) = sum_{n=0}^{terms-1} b^n cos(a^n x) with
/// b = a^{-alpha}; a classical fixture with Holder exponent alpha.
inline double weierstrass(double x, double alpha, double a = 3.0, int terms = 25) {
    const double b = std::pow(a, -alpha);
    double acc = 0.0, bn = 1.0, an = 1.0;
    for (int n = 0; n < terms; ++n) {
        acc += bn * std::cos(an * x);
        bn *= b;
        an *= a;
    }
    return acc;
}

inline Field1D weierstrass_field(double half_width, int n, double alpha, int terms = 25) {
    return make_field(half_width, n, [&](double x) { return weierstrass(x, alpha, 3.0, terms); });
}

/// Weierstrass fixture truncated so every retained frequency stays well below
/// the grid Nyquist rate (a^n <= N/8 on [-pi, pi)). Fields probed by the
/// discrete maximum-principle stencil must be representable on their grid;
/// sub-grid content shows up as stencil violations that say nothing about the
/// PDE.
inline Field1D weierstrass_field_for_grid(double half_width, int n, double alpha) {
    int terms = 1;
    double freq = 3.0;
    while (freq * half_width / std::numbers::pi <= n / 8.0 && terms < 25) {
        ++terms;
        freq *= 3.0;
    }
    return weierstrass_field(half_width, n, alpha, terms);
}

/// Columns: t, x, u.
inline std::string heat_field_csv(const HeatField& h) {
    std::string out = "t,x,u\n";
    for (std::size_t j = 0; j < h.times.size(); ++j)
        for (int i = 0; i < h.base.size(); ++i)
            out += g17(h.times[j]) + "," + g17(h.base.x(i)) + "," + g17(h.values[j][i]) + "\n";
    return out;
}

/// Columns: k, omega, factor.
inline std::string amplification_csv(const std::vector<ModeAmplification>& report) {
    std::string out = "k,omega,factor\n";
    for (const auto& row : report)
        out += std::to_string(row.k) + "," + g17(row.omega) + "," + g17(row.factor) + "\n";
    return out;
}

}  // namespace mollikit::heatlab
