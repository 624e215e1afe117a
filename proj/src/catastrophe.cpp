#include "darkband/catastrophe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "darkband/errors.hpp"

namespace darkband {

namespace {

using cplx = std::complex<double>;
constexpr double pi = std::numbers::pi;

constexpr double kSeriesLo = -8.0;
constexpr double kSeriesHi = 7.0;

double airy_series(double xd) {
    using ld = long double;
    const ld x = xd;
    const ld x3 = x * x * x;
    // Ai(0) and -Ai'(0).
    const ld c1 = 1.0L / (std::pow(3.0L, 2.0L / 3.0L) * std::tgamma(2.0L / 3.0L));
    const ld c2 = 1.0L / (std::pow(3.0L, 1.0L / 3.0L) * std::tgamma(1.0L / 3.0L));
    ld f = 0, g = 0, tf = 1, tg = x;
    for (int k = 0; k < 200; ++k) {
        f += tf;
        g += tg;
        tf *= x3 / ((3 * k + 2) * (3 * k + 3));
        tg *= x3 / ((3 * k + 3) * (3 * k + 4));
        if (std::abs(tf) + std::abs(tg) < 1e-22L * (std::abs(f) + std::abs(g)) && k > 3) break;
    }
    return static_cast<double>(c1 * f - c2 * g);
}

// Coefficients u_k of the Airy asymptotic expansions.
double airy_u(int k) {
    double u = 1.0;
    for (int i = 1; i <= k; ++i) u *= (6.0 * i - 5) * (6.0 * i - 3) * (6.0 * i - 1) / ((2.0 * i - 1) * 216.0 * i);
    return u;
}

double airy_positive_tail(double x) {
    const double zeta = 2.0 / 3.0 * x * std::sqrt(x);
    double sum = 0, prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 60; ++k) {
        const double term = airy_u(k) / std::pow(zeta, k);
        if (term > prev) break;
        sum += (k % 2 ? -term : term);
        prev = term;
        if (term < 1e-17 * std::abs(sum)) break;
    }
    return std::exp(-zeta) / (2.0 * std::sqrt(pi) * std::pow(x, 0.25)) * sum;
}

double airy_negative_tail(double X) {
    const double zeta = 2.0 / 3.0 * X * std::sqrt(X);
    double P = 0, Q = 0, prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 120; ++k) {
        const double term = airy_u(k) / std::pow(zeta, k);
        if (term > prev) break;
        prev = term;
        const double sgn = (k / 2) % 2 ? -1.0 : 1.0;
        (k % 2 ? Q : P) += sgn * term;
        if (term < 1e-17) break;
    }
    const double a = zeta - pi / 4;
    return (std::cos(a) * P + std::sin(a) * Q) / (std::sqrt(pi) * std::pow(X, 0.25));
}

// Adaptive Gauss-Kronrod with an absolute error target.
template <class F>
cplx adapt(const F& f, double a, double b, double abs_tol, int depth) {
    double err = 0;
    const cplx r = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 0, 0.0, &err);
    if (err <= abs_tol || depth == 0) return r;
    const double m = 0.5 * (a + b);
    return adapt(f, a, m, 0.5 * abs_tol, depth - 1) + adapt(f, m, b, 0.5 * abs_tol, depth - 1);
}

// Integral over [a, b] of a complex function, split into pieces of width <= w.
template <class F>
cplx integrate_complex(const F& f, double a, double b, double w) {
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / w)));
    cplx sum = 0;
    for (int i = 0; i < n; ++i)
        sum += adapt(f, a + (b - a) * i / n, a + (b - a) * (i + 1) / n, 1e-14, 12);
    return sum;
}

double tail_exponent(double d, double D, double k) { return 2.0 / 3.0 * k * std::pow(D * d, 1.5); }

void check_band(double theta, const RainbowParams& p, const char* who) {
    p.validate();
    if (!(theta >= p.theta1 && theta <= p.theta2))
        throw ConfigError(std::string(who) + ": angle " + std::to_string(theta) + " outside the dark band");
}

}  // namespace

double airy(double x) {
    if (!std::isfinite(x)) throw ConfigError("airy: non-finite argument");
    if (x < kSeriesLo) return airy_negative_tail(-x);
    if (x > kSeriesHi) return airy_positive_tail(x);
    return airy_series(x);
}

cplx fold_integral(double x) {
    if (!std::isfinite(x)) throw ConfigError("fold_integral: non-finite argument");
    const cplx rot = std::polar(1.0, pi / 6);
    // Right half along u e^{i pi/6}; the left half is its mirror image, so the total is 2 Re.
    auto f = [&](double u) {
        const cplx s = u * rot;
        return std::exp(cplx(0, 1) * (s * s * s / 3.0 + x * s)) * rot;
    };
    // Decay e^{-u^3/3 - x u/2} is below 1e-20 past this cut.
    double U = 2.0;
    while (U * U * U / 3.0 + 0.5 * x * U < 50.0) U += 0.5;
    return 2.0 * integrate_complex(f, 0.0, U, 1.0).real();
}

cplx pearcey(double x, double y) {
    if (!(std::abs(x) <= kPearceyWindow && std::abs(y) <= kPearceyWindow))
        throw ConfigError("pearcey: (" + std::to_string(x) + ", " + std::to_string(y) + ") outside |x|, |y| <= 12");
    const cplx I(0, 1);
    auto phase = [&](cplx s) {
        const cplx s2 = s * s;
        return std::exp(I * (s2 * s2 / 4.0 + y * s2 / 2.0 + x * s));
    };
    constexpr double R = 5.0;
    // Real segment, then tails leaving +-R along e^{i pi/8} directions where the quartic decays.
    const cplx seg = integrate_complex([&](double s) { return phase(cplx(s)); }, -R, R, 0.25);
    const cplx rot = std::polar(1.0, pi / 8);
    const cplx right = integrate_complex([&](double v) { return phase(R + v * rot); }, 0.0, 3.0, 0.25);
    const cplx left = integrate_complex([&](double v) { return phase(-R - v * rot); }, 0.0, 3.0, 0.25);
    return seg + rot * (right + left);
}

double raindrop_deflection(double h, double n, int order) {
    if (!(h >= 0.0 && h <= 1.0)) throw ConfigError("raindrop_deflection: impact parameter outside [0, 1]");
    if (!(n > 1.0)) throw ConfigError("raindrop_deflection: refractive index must exceed 1");
    const double i = std::asin(h);
    const double r = std::asin(h / n);
    if (order == 1) return 4 * r - 2 * i;
    if (order == 2) return pi - (6 * r - 2 * i);
    throw ConfigError("raindrop_deflection: order must be 1 or 2");
}

double raindrop_deflection_slope(double h, double n, int order) {
    if (!(h >= 0.0 && h < 1.0)) throw ConfigError("raindrop_deflection_slope: impact parameter outside [0, 1)");
    const double dr = 1.0 / std::sqrt(n * n - h * h);
    const double di = 1.0 / std::sqrt(1.0 - h * h);
    if (order == 1) return 4 * dr - 2 * di;
    if (order == 2) return -(6 * dr - 2 * di);
    throw ConfigError("raindrop_deflection_slope: order must be 1 or 2");
}

RainbowAngles rainbow_angles(double n) {
    if (!(n > 1.0 && n < 2.0)) throw ConfigError("rainbow_angles: refractive index must lie in (1, 2)");
    RainbowAngles a;
    auto solve = [&](int order) {
        boost::uintmax_t it = 200;
        auto f = [&](double h) { return raindrop_deflection_slope(h, n, order); };
        const auto [lo, hi] = boost::math::tools::toms748_solve(
            f, 0.0, 1.0 - 1e-15, boost::math::tools::eps_tolerance<double>(52), it);
        return 0.5 * (lo + hi);
    };
    a.h1 = solve(1);
    a.h2 = solve(2);
    a.theta1 = raindrop_deflection(a.h1, n, 1);
    a.theta2 = raindrop_deflection(a.h2, n, 2);
    return a;
}

RainbowParams RainbowParams::for_index(double n, double k, double D1, double D2) {
    const auto a = rainbow_angles(n);
    RainbowParams p;
    p.n = n;
    p.k = k;
    p.D1 = D1;
    p.D2 = D2;
    p.theta1 = a.theta1;
    p.theta2 = a.theta2;
    p.validate();
    return p;
}

void RainbowParams::validate() const {
    if (!(n > 1.0)) throw ConfigError("RainbowParams: n must exceed 1");
    if (!(k > 0.0)) throw ConfigError("RainbowParams: k must be positive");
    if (!(D1 > 0.0 && D2 > 0.0)) throw ConfigError("RainbowParams: D1, D2 must be positive");
    if (!(theta1 < theta2)) throw ConfigError("RainbowParams: theta1 must be below theta2");
}

double dark_band_intensity(double theta, const RainbowParams& p) {
    check_band(theta, p, "dark_band_intensity");
    const double a = p.C1 * std::exp(-tail_exponent(theta - p.theta1, p.D1, p.k));
    const double b = p.C2 * std::exp(-tail_exponent(p.theta2 - theta, p.D2, p.k));
    return (a + b) * (a + b);
}

double dark_band_log_intensity(double theta, const RainbowParams& p) {
    check_band(theta, p, "dark_band_log_intensity");
    if (!(p.C1 > 0.0 && p.C2 > 0.0)) return std::log(dark_band_intensity(theta, p));
    const double e1 = std::log(p.C1) - tail_exponent(theta - p.theta1, p.D1, p.k);
    const double e2 = std::log(p.C2) - tail_exponent(p.theta2 - theta, p.D2, p.k);
    const double m = std::max(e1, e2);
    return 2.0 * (m + std::log1p(std::exp(std::min(e1, e2) - m)));
}

double airy_tail_amplitude(double theta, const RainbowParams& p) {
    check_band(theta, p, "airy_tail_amplitude");
    const double k23 = std::cbrt(p.k * p.k);
    auto tail = [&](double C, double D, double d) {
        const double z = k23 * D * d;
        return C * airy(z) * 2.0 * std::sqrt(pi) * std::pow(z, 0.25);
    };
    return tail(p.C1, p.D1, theta - p.theta1) + tail(p.C2, p.D2, p.theta2 - theta);
}

double dark_band_switch_angle(const RainbowParams& p) {
    p.validate();
    auto diff = [&](double th) { return p.D1 * (th - p.theta1) - p.D2 * (p.theta2 - th); };
    double lo = p.theta1, hi = p.theta2;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (diff(mid) < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

DarkBandRate dark_band_rate(double theta, const RainbowParams& p) {
    check_band(theta, p, "dark_band_rate");
    DarkBandRate r;
    r.r = std::min(tail_exponent(theta - p.theta1, p.D1, 1.0), tail_exponent(p.theta2 - theta, p.D2, 1.0));
    r.theta_star = dark_band_switch_angle(p);
    return r;
}

}  // namespace darkband
