#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>

#include "darkband/errors.hpp"

namespace darkband::ode {

struct Options {
    double rtol = 1e-11;
    double atol = 1e-13;
    double h0 = 0.0;  // 0 picks a starting step automatically
    double hmin = 1e-13;
    double hmax = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 2'000'000;
};

class StepUnderflow : public NumericError {
public:
    explicit StepUnderflow(double t) : NumericError("integrator step underflow"), t_(t) {}
    double time() const noexcept { return t_; }

private:
    double t_;
};

template <class Scalar, std::size_t N>
using State = std::array<Scalar, N>;

// One accepted Dormand-Prince step with its continuous extension.
template <class Scalar, std::size_t N>
struct DenseStep {
    double t0 = 0.0;
    double t1 = 0.0;
    std::array<State<Scalar, N>, 5> rc{};

    State<Scalar, N> operator()(double t) const {
        const double h = t1 - t0;
        const double s = h == 0.0 ? 0.0 : (t - t0) / h;
        const double s1 = 1.0 - s;
        State<Scalar, N> y;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = rc[0][i] + s * (rc[1][i] + s1 * (rc[2][i] + s * (rc[3][i] + s1 * rc[4][i])));
        return y;
    }
};

// Adaptive Dormand-Prince 5(4) from t0 to t1 (t1 may be below t0). The
// observer is called with every accepted DenseStep and may return false to
// stop early; the state at the stopping time is returned.
template <class Scalar, std::size_t N, class Rhs, class Observer>
State<Scalar, N> integrate(Rhs&& f, double t0, State<Scalar, N> y, double t1, const Options& opt,
                           Observer&& observe) {
    using S = State<Scalar, N>;
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    if (t1 == t0) return y;
    const double dir = t1 > t0 ? 1.0 : -1.0;
    double t = t0;
    S k1 = f(t, y);

    auto combo = [&](const S& base, double h, std::initializer_list<std::pair<double, const S*>> terms) {
        S out = base;
        for (const auto& [c, k] : terms)
            for (std::size_t i = 0; i < N; ++i) out[i] += (h * c) * (*k)[i];
        return out;
    };
    auto inf_norm = [](const S& v) {
        double m = 0.0;
        for (const auto& x : v) m = std::max(m, std::abs(x));
        return m;
    };

    double h = opt.h0;
    if (h <= 0.0) {
        const double d0 = inf_norm(y), df = inf_norm(k1);
        h = (d0 < 1e-5 || df < 1e-5) ? 1e-6 : 0.01 * d0 / df;
        h = std::min({h, std::abs(t1 - t0), opt.hmax});
    }
    h = std::min(h, opt.hmax);

    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        const double remaining = std::abs(t1 - t);
        if (remaining <= 1e-15 * std::max(1.0, std::abs(t1))) return y;
        bool last = false;
        if (h >= remaining) {
            h = remaining;
            last = true;
        }
        const double hs = dir * h;
        const S k2 = f(t + c2 * hs, combo(y, hs, {{a21, &k1}}));
        const S k3 = f(t + c3 * hs, combo(y, hs, {{a31, &k1}, {a32, &k2}}));
        const S k4 = f(t + c4 * hs, combo(y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const S k5 = f(t + c5 * hs, combo(y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const S k6 =
            f(t + hs, combo(y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const S y1 = combo(y, hs, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
        const S k7 = f(t + hs, y1);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const Scalar ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
            err += std::norm(ei / sc);
        }
        err = std::sqrt(err / static_cast<double>(N));
        if (!std::isfinite(err)) err = 1e10;

        if (err <= 1.0) {
            DenseStep<Scalar, N> ds;
            ds.t0 = t;
            ds.t1 = last ? t1 : t + hs;
            for (std::size_t i = 0; i < N; ++i) {
                const Scalar ydiff = y1[i] - y[i];
                const Scalar bspl = hs * k1[i] - ydiff;
                ds.rc[0][i] = y[i];
                ds.rc[1][i] = ydiff;
                ds.rc[2][i] = bspl;
                ds.rc[3][i] = ydiff - hs * k7[i] - bspl;
                ds.rc[4][i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            }
            t = ds.t1;
            y = y1;
            k1 = k7;
            if (!observe(ds)) return y;
            if (last) return y;
            const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = std::min(h * fac, opt.hmax);
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            if (h < opt.hmin) throw StepUnderflow(t);
        }
    }
    throw StepUnderflow(t);
}

template <class Scalar, std::size_t N, class Rhs>
State<Scalar, N> integrate(Rhs&& f, double t0, const State<Scalar, N>& y, double t1, const Options& opt) {
    return integrate<Scalar, N>(std::forward<Rhs>(f), t0, y, t1, opt,
                                [](const DenseStep<Scalar, N>&) { return true; });
}

}  // namespace darkband::ode
