#include "darkband/wkb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "darkband/errors.hpp"

namespace darkband {

namespace {

constexpr double kPi = std::numbers::pi;

double quad(const auto& f, double a, double b) {
    if (a == b) return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-13, &err);
}

struct Shell {
    double eps, G, Omega;

    double num(double eta) const { return eps - 0.5 * G * eta * eta; }
    // cos(phi) on the energy shell; infinite at the poles unless eps = G/2.
    double c(double eta) const {
        const double s2 = std::max(0.0, 1.0 - eta * eta);
        const double n = num(eta);
        if (s2 == 0.0) return n == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), n);
        return n / (Omega * std::sqrt(s2));
    }
    // Squared latitude speed (d eta/dt)^2 = Omega^2 (1 - eta^2) - num^2.
    double P(double eta) const {
        const double n = num(eta);
        return Omega * Omega * (1.0 - eta * eta) - n * n;
    }
    // Same quantity written as P(turn) + (eta - turn) D(eta, turn), with the
    // offset passed exactly so it stays accurate next to a turning point.
    double P_near(double eta, double offset, double turn) const {
        const double g = 0.5 * G;
        const double d = (eta + turn) * ((2.0 * eps * g - Omega * Omega) - g * g * (eta * eta + turn * turn));
        return std::max(0.0, P(turn)) + offset * d;
    }
    double phi(double eta) const { return std::acos(std::clamp(c(eta), -1.0, 1.0)); }
    double phi_near(double eta, double offset, double turn) const {
        return std::atan2(std::sqrt(std::max(0.0, P_near(eta, offset, turn))), num(eta));
    }
};

struct Turn {
    double eta = 0.0;
    double phi_tp = 0.0;  // 0 where cos(phi) = +1, pi where cos(phi) = -1
    bool pole = false;
};

// First latitude beyond eta_start in direction dir (+1/-1) where the shell
// stops being classically allowed.
Turn find_turn(const Shell& sh, double eta_start, int dir) {
    const double c0 = sh.c(eta_start);
    if (std::abs(c0) > 1.0 + 1e-12) throw ForbiddenError("energy shell does not reach the starting latitude");
    auto bad = [&](double eta) { return std::abs(sh.c(eta)) > 1.0; };
    if (std::abs(c0) >= 1.0) return Turn{eta_start, c0 > 0 ? 0.0 : kPi, false};

    const double end = dir > 0 ? 1.0 : -1.0;
    constexpr int kScan = 2048;
    double prev = eta_start;
    for (int i = 1; i <= kScan; ++i) {
        const double eta = eta_start + (end - eta_start) * static_cast<double>(i) / kScan;
        if (bad(eta)) {
            double a = prev, b = eta;
            for (int it = 0; it < 200 && a != b; ++it) {
                const double m = 0.5 * (a + b);
                if (m == a || m == b) break;
                (bad(m) ? b : a) = m;
            }
            return Turn{a, sh.c(a) > 0 ? 0.0 : kPi, false};
        }
        prev = eta;
    }
    return Turn{end, 0.5 * kPi, true};
}

// Integral of f(eta, eta - turn) over [from, turn], substituting
// eta = turn -/+ u^2 so square-root endpoint behaviour becomes smooth.
double to_turn(const auto& f, double from, double turn) {
    const double span = std::abs(turn - from);
    if (span == 0.0) return 0.0;
    const double sgn = turn > from ? 1.0 : -1.0;
    const double U = std::sqrt(span);
    return quad([&](double u) { return f(turn - sgn * u * u, -sgn * u * u) * 2.0 * u; }, 0.0, U);
}

// Time from `from` to the turning point; 2u / sqrt(P) with P ~ u^2 near it.
double time_to_turn(const Shell& sh, double from, double turn) {
    const double span = std::abs(turn - from);
    if (span == 0.0) return 0.0;
    const double sgn = turn > from ? 1.0 : -1.0;
    const double U = std::sqrt(span);
    const double Pt = std::max(0.0, sh.P(turn));
    const double g = 0.5 * sh.G;
    return quad(
        [&](double u) {
            const double eta = turn - sgn * u * u;
            const double d = (eta + turn) * ((2.0 * sh.eps * g - sh.Omega * sh.Omega) - g * g * (eta * eta + turn * turn));
            const double k = -sgn * d;  // P = Pt + u^2 k
            const double q = (u > 0 ? Pt / (u * u) : 0.0) + k;
            if (!(q > 0)) return 0.0;
            return 2.0 / std::sqrt(q);
        },
        0.0, U);
}

double a_up(const Shell& sh, double eta0) {
    const Turn t = find_turn(sh, eta0, +1);
    return 2.0 * to_turn([&](double eta, double off) { return t.phi_tp - sh.phi_near(eta, off, t.eta); }, eta0, t.eta);
}

}  // namespace

void ActionBranch::validate() const {
    if (!((k == 0 && l == +1) || (k == 1 && l == -1)))
        throw ConfigError("ActionBranch: only (l, k) = (+1, 0) and (-1, 1) are implemented");
    if (!(std::abs(eta0) < 1.0)) throw ConfigError("ActionBranch: |eta0| must be below 1");
}

bool near_separatrix(double eps, double G) { return std::abs(eps - 0.5 * G) < kSeparatrixWindow * std::abs(G); }

double momentum_branch(double eps, double eta, double G, double Omega) {
    if (std::abs(eta) > 1.0) throw ConfigError("momentum_branch: |eta| > 1");
    const double c = Shell{eps, G, Omega}.c(eta);
    if (!(std::abs(c) <= 1.0 + 1e-13)) throw ForbiddenError("momentum_branch: classically forbidden point");
    return std::acos(std::clamp(c, -1.0, 1.0));
}

double turning_point(double eps, double G, double Omega) {
    auto f = [&](double eta) { return 0.5 * G * eta * eta + Omega * std::sqrt(std::max(0.0, 1.0 - eta * eta)) - eps; };
    if (f(0.0) == 0.0) return 0.0;
    // Largest positive root found by scanning down from the pole.
    constexpr int kScan = 4096;
    double hi = 1.0, fhi = f(1.0);
    if (fhi == 0.0) return 1.0;
    for (int i = kScan - 1; i >= 0; --i) {
        const double lo = static_cast<double>(i) / kScan;
        const double flo = f(lo);
        if (flo == 0.0) return lo;
        if ((flo < 0) != (fhi < 0)) {
            boost::uintmax_t iters = 200;
            const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                             boost::math::tools::eps_tolerance<double>(52), iters);
            return 0.5 * (r.first + r.second);
        }
        hi = lo;
        fhi = flo;
    }
    throw ForbiddenError("turning_point: no positive turning point for this energy");
}

double reduced_action(double eps, double eta, double G, double Omega) {
    const Shell sh{eps, G, Omega};
    const double star = turning_point(eps, G, Omega);
    if (eta > star + 1e-14) throw ForbiddenError("reduced_action: latitude beyond the turning point");
    if (eta >= star) return 0.0;
    for (int i = 0; i <= 512; ++i) {
        const double x = eta + (star - eta) * i / 512.0;
        if (std::abs(sh.c(x)) > 1.0 + 1e-12) throw ForbiddenError("reduced_action: path crosses a forbidden region");
    }
    return -to_turn([&](double x, double off) { return sh.phi_near(x, off, star); }, eta, star);
}

EnergyRange spectrum_range(double G, double Omega) {
    auto lower = [&](double z) { return 0.5 * G * z * z - std::abs(Omega) * std::sqrt(std::max(0.0, 1.0 - z * z)); };
    auto upper = [&](double z) { return -(0.5 * G * z * z + std::abs(Omega) * std::sqrt(std::max(0.0, 1.0 - z * z))); };
    auto minimize = [](const auto& f) {
        constexpr int kScan = 2000;
        int best = 0;
        for (int i = 1; i <= kScan; ++i)
            if (f(static_cast<double>(i) / kScan) < f(static_cast<double>(best) / kScan)) best = i;
        const double a = std::max(0, best - 1) / static_cast<double>(kScan);
        const double b = std::min(kScan, best + 1) / static_cast<double>(kScan);
        const auto r = boost::math::tools::brent_find_minima(f, a, b, 40);
        return std::min({r.second, f(a), f(b)});
    };
    return EnergyRange{minimize(lower), -minimize(upper)};
}

EnergyRange allowed_window(double eta0, double G, double Omega) {
    if (!(std::abs(eta0) < 1.0)) throw ConfigError("allowed_window: |eta0| must be below 1");
    const double mid = 0.5 * G * eta0 * eta0;
    const double half = std::abs(Omega) * std::sqrt(1.0 - eta0 * eta0);
    return EnergyRange{mid - half, mid + half};
}

namespace {

double round_trip_raw(const Shell& sh) {
    if (std::abs(sh.c(0.0)) > 1.0)
        throw NumericError("round_trip_action: energy shell does not cross the equator");
    const Turn t = find_turn(sh, 0.0, +1);
    if (sh.eps >= 0.5 * sh.G) {
        if (!t.pole && t.phi_tp != 0.0) throw NumericError("round_trip_action: unexpected shell topology");
        return 4.0 * kPi - 4.0 * to_turn([&](double x, double off) { return sh.phi_near(x, off, t.eta); }, 0.0, t.eta);
    }
    if (t.phi_tp != kPi) throw NumericError("round_trip_action: unexpected shell topology");
    return 4.0 * to_turn([&](double x, double off) { return kPi - sh.phi_near(x, off, t.eta); }, 0.0, t.eta);
}

}  // namespace

double round_trip_action(double eps, double G, double Omega) {
    const EnergyRange r = spectrum_range(G, Omega);
    const double slack = 1e-12 * std::max(1.0, std::abs(r.hi - r.lo));
    if (eps < r.lo - slack || eps > r.hi + slack) throw ForbiddenError("round_trip_action: energy outside spectrum");
    if (eps <= r.lo) return 0.0;
    if (eps >= r.hi) return 4.0 * kPi;
    return round_trip_raw(Shell{eps, G, Omega});
}

double orbit_period(double eps, double G, double Omega) {
    const Shell sh{eps, G, Omega};
    const Turn t = find_turn(sh, 0.0, +1);
    return 4.0 * time_to_turn(sh, 0.0, t.eta);
}

std::vector<WkbLevel> bohr_sommerfeld(const DickeSpace& space, double G, double Omega) {
    const double j = space.j();
    if (j < 5.0) throw ConfigError("bohr_sommerfeld: j must be at least 5");
    const EnergyRange r = spectrum_range(G, Omega);
    std::vector<WkbLevel> out;
    for (int n = 0;; ++n) {
        const double target = 2.0 * kPi * (n + 0.5) / j;
        if (target >= 4.0 * kPi) break;
        auto f = [&](double e) {
            const double S = e <= r.lo ? 0.0 : e >= r.hi ? 4.0 * kPi : round_trip_raw(Shell{e, G, Omega});
            return j * (S - target);
        };
        WkbLevel lv{n, std::nan(""), false};
        try {
            boost::uintmax_t iters = 300;
            const auto b = boost::math::tools::toms748_solve(f, r.lo, r.hi, f(r.lo), f(r.hi),
                                                             boost::math::tools::eps_tolerance<double>(50), iters);
            lv.eps = 0.5 * (b.first + b.second);
            lv.approximate = near_separatrix(lv.eps, G) || std::abs(f(lv.eps)) > 1e-10;
        } catch (const std::exception&) {
            lv.approximate = true;
        }
        out.push_back(lv);
    }
    return out;
}

double branch_action(double eps, const ActionBranch& branch, double G, double Omega) {
    branch.validate();
    const Shell sh{eps, G, Omega};
    const double up = a_up(sh, branch.eta0);
    return branch.k == 0 ? up : round_trip_raw(sh) - up;
}

double excursion_time(double eps, double eta0, bool up, double G, double Omega) {
    const Shell sh{eps, G, Omega};
    const Turn t = find_turn(sh, eta0, up ? +1 : -1);
    return 2.0 * time_to_turn(sh, eta0, t.eta);
}

double return_time(double eps, const ActionBranch& branch, double G, double Omega) {
    branch.validate();
    const EnergyRange w = allowed_window(branch.eta0, G, Omega);
    const double slack = 1e-12;
    if (eps < w.lo - slack || eps > w.hi + slack) throw ForbiddenError("return_time: energy outside allowed window");
    if (near_separatrix(eps, G)) return excursion_time(eps, branch.eta0, branch.k == 0, G, Omega);

    const double h = 1e-5 * std::abs(Omega);
    auto A = [&](double e) { return branch_action(e, branch, G, Omega); };
    if (eps - h >= w.lo && eps + h <= w.hi) {
        const double d1 = (A(eps + h) - A(eps - h)) / (2 * h);
        const double d2 = (A(eps + 0.5 * h) - A(eps - 0.5 * h)) / h;
        return (4.0 * d2 - d1) / 3.0;
    }
    // One-sided near the window edges.
    const double s = eps - h < w.lo ? 1.0 : -1.0;
    const double a0 = A(eps), a1 = A(eps + s * h), a2 = A(eps + 2 * s * h), a4 = A(eps + 4 * s * h);
    const double dh = (-3 * a0 + 4 * a1 - a2) / (2 * s * h);
    const double d2h = (-3 * a0 + 4 * a2 - a4) / (4 * s * h);
    return (4.0 * dh - d2h) / 3.0;
}

CausticPoint caustic_time(const ActionBranch& branch, double G, double Omega) {
    branch.validate();
    const EnergyRange w = allowed_window(branch.eta0, G, Omega);
    const double sgn = branch.k == 0 ? -1.0 : 1.0;  // minimize sgn * T
    auto f = [&](double e) { return sgn * return_time(e, branch, G, Omega); };
    constexpr int kScan = 96;
    const double width = w.hi - w.lo;
    std::vector<double> grid(kScan + 1), val(kScan + 1);
    int best = 1;
    for (int i = 1; i < kScan; ++i) {
        grid[i] = w.lo + width * i / kScan;
        val[i] = f(grid[i]);
        if (val[i] < val[best]) best = i;
    }
    const double a = w.lo + width * (best - 1) / kScan;
    const double b = w.lo + width * (best + 1) / kScan;
    const auto r = boost::math::tools::brent_find_minima(f, a, b, std::numeric_limits<double>::digits / 2);
    return CausticPoint{sgn * r.second, r.first};
}

StationarySet stationary_energies(double t, const ActionBranch& branch, double G, double Omega) {
    if (t < 0) throw ConfigError("stationary_energies: negative time");
    branch.validate();
    StationarySet out;
    const CausticPoint cp = caustic_time(branch, G, Omega);
    if (std::abs(t - cp.t) <= 1e-9 * std::max(1.0, t)) {
        out.eps.push_back(cp.eps);
        out.degenerate = true;
        return out;
    }
    const EnergyRange w = allowed_window(branch.eta0, G, Omega);
    auto g = [&](double e) { return return_time(e, branch, G, Omega) - t; };
    auto solve_side = [&](double a, double b) {
        const double ga = g(a), gb = g(b);
        if ((ga < 0) == (gb < 0)) return;
        boost::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, boost::math::tools::eps_tolerance<double>(45), iters);
        out.eps.push_back(0.5 * (r.first + r.second));
    };
    const double edge = 1e-9 * (w.hi - w.lo);
    solve_side(w.lo + edge, cp.eps);
    solve_side(cp.eps, w.hi - edge);
    return out;
}

}  // namespace darkband
