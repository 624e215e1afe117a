#include "darkband/complexmech.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "darkband/classical.hpp"
#include "darkband/errors.hpp"
#include "darkband/ode.hpp"

namespace darkband {

namespace {

constexpr double kPi = std::numbers::pi;
using State = ode::State<cplx, 4>;  // phi, eta, s, int phi d eta

struct ComplexFlow {
    double G, Omega;
    State operator()(double, const State& y) const {
        const cplx sphi = std::sin(y[0]);
        const cplx etad = Omega * y[2] * sphi;
        return {G * y[1] - Omega * y[1] * std::cos(y[0]) / y[2], etad, -Omega * y[1] * sphi, y[0] * etad};
    }
};

cplx energy_of(const State& y, double G, double Omega) {
    return 0.5 * G * y[1] * y[1] + Omega * y[2] * std::cos(y[0]);
}

ode::Options complex_options(double tol) {
    ode::Options o;
    o.rtol = tol;
    o.atol = tol;
    o.hmax = 0.05;
    o.hmin = 1e-12;
    return o;
}

State start_state(cplx phi0, double eta0) {
    if (!(std::abs(eta0) < 1.0)) throw ConfigError("integrate_complex: |eta0| must be below 1");
    return {phi0, cplx(eta0), cplx(std::sqrt(1.0 - eta0 * eta0)), cplx(0.0)};
}

ComplexEnd finish(const State& y, cplx e0, double t, double drift) {
    return ComplexEnd{{y[0], y[1], y[2]}, -y[3] - e0 * t, e0, drift};
}

cplx eta_at(cplx phi0, double eta0, double t, double G, double Omega) {
    return integrate_complex(phi0, eta0, t, G, Omega).point.eta;
}

}  // namespace

ComplexEnd integrate_complex(cplx phi0, double eta0, double t_end, double G, double Omega, double tol) {
    State y = start_state(phi0, eta0);
    const cplx e0 = energy_of(y, G, Omega);
    double drift = 0.0;
    try {
        y = ode::integrate<cplx, 4>(ComplexFlow{G, Omega}, 0.0, y, t_end, complex_options(tol),
                                    [&](const ode::DenseStep<cplx, 4>& ds) {
                                        const State e = ds(ds.t1);
                                        drift = std::max(drift, std::abs(energy_of(e, G, Omega) - e0));
                                        return true;
                                    });
    } catch (const ode::StepUnderflow& e) {
        throw PoleError("integrate_complex: step underflow", e.time());
    }
    if (std::abs(y[2] * y[2] + y[1] * y[1] - 1.0) > 1e-6)
        throw NumericError("integrate_complex: lost the square-root branch");
    return finish(y, e0, t_end, drift);
}

std::vector<ComplexEnd> integrate_complex_path(cplx phi0, double eta0, const std::vector<double>& times, double G,
                                               double Omega, double tol) {
    if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0))
        throw ConfigError("integrate_complex_path: times must be ascending and non-negative");
    State y = start_state(phi0, eta0);
    const cplx e0 = energy_of(y, G, Omega);
    std::vector<ComplexEnd> out;
    std::size_t next = 0;
    while (next < times.size() && times[next] == 0.0) out.push_back(finish(y, e0, 0.0, 0.0)), ++next;
    if (next == times.size()) return out;
    // Each sample is a step endpoint, so no interpolation error enters.
    double drift = 0.0, t = 0.0;
    for (; next < times.size(); ++next) {
        if (times[next] > t) {
            y = ode::integrate<cplx, 4>(ComplexFlow{G, Omega}, t, y, times[next], complex_options(tol),
                                        [&](const ode::DenseStep<cplx, 4>& ds) {
                                            drift = std::max(drift, std::abs(energy_of(ds(ds.t1), G, Omega) - e0));
                                            return true;
                                        });
            t = times[next];
        }
        out.push_back(finish(y, e0, t, drift));
    }
    return out;
}

SaddleSolution shoot_return(double t, const ActionBranch& branch, double eta_target, cplx seed, double G,
                            double Omega, int max_iter) {
    if (!(t > 0)) throw ConfigError("shoot_return: t must be positive");
    branch.validate();
    const double eta0 = branch.eta0;
    constexpr double h = 1e-7;
    SaddleSolution sol;
    sol.t = t;
    sol.branch = branch;
    sol.eta_target = eta_target;
    cplx phi = seed;
    cplx F;
    try {
        F = eta_at(phi, eta0, t, G, Omega) - eta_target;
        for (int it = 0; it < max_iter && std::abs(F) > 1e-13; ++it) {
            const cplx dre = (eta_at(phi + h, eta0, t, G, Omega) - eta_target - F) / h;
            const cplx dim = (eta_at(phi + cplx(0, h), eta0, t, G, Omega) - eta_target - F) / h;
            const double a = dre.real(), b = dim.real(), c = dre.imag(), d = dim.imag();
            const double det = a * d - b * c;
            const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d), 1e-300});
            if (std::abs(det) < 1e-14 * scale * scale) {
                sol.degenerate = true;
                break;
            }
            const double dx = -(d * F.real() - b * F.imag()) / det;
            const double dy = -(-c * F.real() + a * F.imag()) / det;
            cplx step(dx, dy);
            const double cap = 0.5;
            if (std::abs(step) > cap) step *= cap / std::abs(step);
            // Backtrack until the residual decreases.
            bool moved = false;
            for (int bt = 0; bt < 12; ++bt) {
                const cplx trial = phi + step;
                cplx Ft;
                try {
                    Ft = eta_at(trial, eta0, t, G, Omega) - eta_target;
                } catch (const NumericError&) {
                    step *= 0.5;
                    continue;
                }
                if (std::abs(Ft) < std::abs(F)) {
                    phi = trial;
                    F = Ft;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        const ComplexEnd end = integrate_complex(phi, eta0, t, G, Omega);
        sol.phi0 = phi;
        sol.action = end.action;
        sol.energy = end.energy;
        sol.residual = std::abs(end.point.eta - eta_target);
        sol.converged = sol.residual < 1e-10;
    } catch (const NumericError&) {
        sol.phi0 = phi;
        sol.converged = false;
        sol.residual = std::numeric_limits<double>::infinity();
    }
    return sol;
}

SaddleSolution physical_branch(SaddleSolution sol) {
    if (sol.action.imag() < 0) {
        sol.phi0 = std::conj(sol.phi0);
        sol.action = std::conj(sol.action);
        sol.energy = std::conj(sol.energy);
    }
    return sol;
}

namespace {

double class_time(const ActionBranch& b, double phi0, double eta_target, double G, double Omega) {
    return class_return_time(b.k, phi0, b.eta0, eta_target, ClassicalModel{G, Omega}, 60.0, 1e-13);
}

}  // namespace

ReturnMap::ReturnMap(const ActionBranch& branch, double eta_target, double G, double Omega, std::size_t n_grid)
    : branch_(branch), eta_target_(eta_target), G_(G), Omega_(Omega) {
    branch.validate();
    if (n_grid < 16) throw ConfigError("ReturnMap: grid too coarse");
    const double base = branch.k == 0 ? 0.0 : kPi;
    phi_.resize(n_grid);
    T_.resize(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) {
        phi_[i] = base + kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(n_grid);
        T_[i] = class_time(branch, phi_[i], eta_target, G, Omega);
    }
    const double sgn = branch.k == 0 ? -1.0 : 1.0;  // minimize sgn * T
    std::size_t best = n_grid;
    for (std::size_t i = 0; i < n_grid; ++i)
        if (T_[i] > 0 && (best == n_grid || sgn * T_[i] < sgn * T_[best])) best = i;
    if (best == n_grid) throw NumericError("ReturnMap: no returning trajectories of this class");
    if (best == 0 || best + 1 == n_grid || !(T_[best - 1] > 0) || !(T_[best + 1] > 0))
        throw NumericError("ReturnMap: return-time extremum lies on the domain boundary");
    auto f = [&](double p) {
        const double T = class_time(branch, p, eta_target, G, Omega);
        return T > 0 ? sgn * T : 1e10;
    };
    const auto r = boost::math::tools::brent_find_minima(f, phi_[best - 1], phi_[best + 1],
                                                         std::numeric_limits<double>::digits / 2);
    caustic_ = ReturnCaustic{sgn * r.second, r.first};
}

bool ReturnMap::allowed(double t) const { return branch_.k == 0 ? t < caustic_.t : t > caustic_.t; }

std::vector<SaddleSolution> ReturnMap::real_saddles(double t) const {
    std::vector<SaddleSolution> out;
    if (!allowed(t)) return out;
    auto g = [&](double p) { return class_time(branch_, p, eta_target_, G_, Omega_) - t; };
    // Sample points on each side of the caustic, which is inserted as a node.
    std::vector<std::pair<double, double>> nodes;
    for (std::size_t i = 0; i < phi_.size(); ++i)
        if (T_[i] > 0) nodes.emplace_back(phi_[i], T_[i] - t);
    nodes.emplace_back(caustic_.phi0, caustic_.t - t);
    std::sort(nodes.begin(), nodes.end());
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const auto [a, ga] = nodes[i];
        const auto [b, gb] = nodes[i + 1];
        if ((ga < 0) == (gb < 0)) continue;
        boost::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, boost::math::tools::eps_tolerance<double>(50), iters);
        const double p = 0.5 * (r.first + r.second);
        const ComplexEnd end = integrate_complex(cplx(p), branch_.eta0, t, G_, Omega_);
        SaddleSolution s;
        s.t = t;
        s.branch = branch_;
        s.eta_target = eta_target_;
        s.phi0 = cplx(p);
        s.action = cplx(end.action.real(), 0.0);
        s.energy = end.energy;
        s.residual = std::abs(end.point.eta - eta_target_);
        s.converged = s.residual < 1e-9;
        out.push_back(s);
    }
    return out;
}

ReturnCaustic locate_caustic(const ActionBranch& branch, double eta_target, double G, double Omega) {
    return ReturnMap(branch, eta_target, G, Omega).caustic();
}

BranchTrack continue_branch(const ActionBranch& branch, const std::vector<double>& t_grid, double eta_target,
                            double G, double Omega) {
    branch.validate();
    if (!std::is_sorted(t_grid.begin(), t_grid.end()))
        throw ConfigError("continue_branch: time grid must be ascending");
    const ReturnMap map(branch, eta_target, G, Omega);
    BranchTrack track;
    track.caustic = map.caustic();
    const double tc = track.caustic.t;
    const double phic = track.caustic.phi0;
    track.solutions.resize(t_grid.size());

    std::vector<std::size_t> forbidden;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double t = t_grid[i];
        if (map.allowed(t)) {
            const auto real = map.real_saddles(t);
            SaddleSolution s;
            if (!real.empty()) s = real.front();
            s.t = t;
            s.branch = branch;
            s.eta_target = eta_target;
            track.solutions[i] = s;
        } else {
            forbidden.push_back(i);
        }
    }
    // March away from the caustic.
    if (branch.k == 1) std::reverse(forbidden.begin(), forbidden.end());
    const double dir = branch.k == 0 ? 1.0 : -1.0;

    std::vector<std::pair<double, cplx>> hist{{0.0, cplx(phic)}};  // (sqrt|t - tc|, phi0)
    double tau = tc;
    double step = 1e-3;
    bool broken = false;
    for (std::size_t idx : forbidden) {
        const double target = t_grid[idx];
        SaddleSolution last;
        last.converged = false;
        if (broken) {
            track.solutions[idx] = SaddleSolution{target, branch, eta_target, {}, {}, {}};
            continue;
        }
        while (dir * (target - tau) > 0) {
            const double dt = std::min(step, dir * (target - tau));
            const double tau_new = dir * (target - tau) - dt < 1e-12 ? target : tau + dir * dt;
            const double sig = std::sqrt(std::abs(tau_new - tc));
            cplx seed;
            if (hist.size() < 2) {
                seed = cplx(phic, 0.01);
            } else {
                const auto& [s1, p1] = hist[hist.size() - 2];
                const auto& [s2, p2] = hist.back();
                seed = p2 + (p2 - p1) * ((sig - s2) / (s2 - s1));
            }
            SaddleSolution s = shoot_return(tau_new, branch, eta_target, seed, G, Omega);
            if (s.converged) s = physical_branch(s);
            const bool jump = hist.size() >= 2 && std::abs(s.phi0 - seed) > 0.05 + 0.5 * std::abs(seed - hist.back().second);
            if (s.converged && !jump && (s.phi0.imag() != 0.0 || hist.size() >= 2)) {
                tau = tau_new;
                hist.emplace_back(sig, s.phi0);
                last = s;
                step = std::min(step * 1.6, 0.05);
            } else {
                step *= 0.5;
                if (step < 1e-7) {
                    broken = true;
                    break;
                }
            }
        }
        if (broken) {
            track.break_index = idx;
            track.solutions[idx] = SaddleSolution{target, branch, eta_target, {}, {}, {}};
        } else {
            last.t = target;
            track.solutions[idx] = last;
        }
    }
    return track;
}

SaddleSolution solve_near(const BranchTrack& track, double t, double G, double Omega) {
    const auto& sol = track.solutions;
    const SaddleSolution* lo = nullptr;
    const SaddleSolution* hi = nullptr;
    for (const auto& s : sol) {
        if (!s.converged) continue;
        if (s.t <= t && (!lo || s.t > lo->t)) lo = &s;
        if (s.t >= t && (!hi || s.t < hi->t)) hi = &s;
    }
    if (!lo && !hi) throw NumericError("solve_near: track has no converged solutions");
    const SaddleSolution& ref = lo ? *lo : *hi;
    cplx seed = ref.phi0;
    if (lo && hi && hi->t > lo->t) seed = lo->phi0 + (hi->phi0 - lo->phi0) * ((t - lo->t) / (hi->t - lo->t));
    SaddleSolution s = shoot_return(t, ref.branch, ref.eta_target, seed, G, Omega);
    return s.converged ? physical_branch(s) : s;
}

double branch_rate(const SaddleSolution& sol) {
    if (!sol.converged) throw NumericError("branch_rate: unconverged saddle");
    return std::max(0.0, 2.0 * sol.action.imag());
}

Prefactor van_vleck_prefactor(const SaddleSolution& sol, double G, double Omega, double h) {
    if (!sol.converged) throw NumericError("van_vleck_prefactor: unconverged saddle");
    const double eta0 = sol.branch.eta0;
    const cplx ep = eta_at(sol.phi0 + h, eta0, sol.t, G, Omega);
    const cplx em = eta_at(sol.phi0 - h, eta0, sol.t, G, Omega);
    Prefactor p;
    p.deta_dphi0 = (ep - em) / (2.0 * h);
    p.divergent = std::abs(p.deta_dphi0) < 1e-6;
    p.value = p.divergent ? std::numeric_limits<double>::infinity() : 1.0 / std::sqrt(std::abs(p.deta_dphi0));
    return p;
}

double branch_crossing(const BranchTrack& k0, const BranchTrack& k1, double a, double b, double G, double Omega,
                       double t_tol) {
    auto diff = [&](double t) {
        const SaddleSolution s0 = solve_near(k0, t, G, Omega);
        const SaddleSolution s1 = solve_near(k1, t, G, Omega);
        if (!s0.converged || !s1.converged) throw NumericError("branch_crossing: shooting failed");
        return branch_rate(s0) - branch_rate(s1);
    };
    double fa = diff(a);
    const double fb = diff(b);
    if ((fa < 0) == (fb < 0)) throw NumericError("branch_crossing: rates do not cross in the bracket");
    while (b - a > t_tol) {
        const double m = 0.5 * (a + b);
        const double fm = diff(m);
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

RateCurve asymptotic_rate(const std::vector<double>& t_grid, double eta0, double G, double Omega) {
    const BranchTrack k0 = continue_branch(ActionBranch::first(eta0), t_grid, eta0, G, Omega);
    const BranchTrack k1 = continue_branch(ActionBranch::second(eta0), t_grid, eta0, G, Omega);
    RateCurve rc;
    rc.t = t_grid;
    const std::size_t n = t_grid.size();
    rc.r0.assign(n, 0.0);
    rc.r1.assign(n, 0.0);
    rc.r.assign(n, 0.0);
    rc.valid.assign(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t_grid[i];
        const bool f0 = t > k0.caustic.t, f1 = t < k1.caustic.t;
        if (f0) {
            if (k0.solutions[i].converged) rc.r0[i] = branch_rate(k0.solutions[i]);
            else rc.valid[i] = false;
        }
        if (f1) {
            if (k1.solutions[i].converged) rc.r1[i] = branch_rate(k1.solutions[i]);
            else rc.valid[i] = false;
        }
        rc.r[i] = (f0 && f1) ? std::min(rc.r0[i], rc.r1[i]) : 0.0;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const bool inside = t_grid[i] > k0.caustic.t && t_grid[i + 1] < k1.caustic.t;
        if (!inside || !rc.valid[i] || !rc.valid[i + 1]) continue;
        const double d0 = rc.r0[i] - rc.r1[i], d1 = rc.r0[i + 1] - rc.r1[i + 1];
        if ((d0 < 0) != (d1 < 0)) {
            rc.kink_t = branch_crossing(k0, k1, t_grid[i], t_grid[i + 1], G, Omega);
            break;
        }
    }
    return rc;
}

std::vector<SemiclassicalEcho> semiclassical_loschmidt(double j, const std::vector<double>& t_grid, double eta0,
                                                       double G, double Omega) {
    if (!(j > 0)) throw ConfigError("semiclassical_loschmidt: j must be positive");
    const ActionBranch b0 = ActionBranch::first(eta0), b1 = ActionBranch::second(eta0);
    const ReturnMap m0(b0, eta0, G, Omega), m1(b1, eta0, G, Omega);
    const BranchTrack k0 = continue_branch(b0, t_grid, eta0, G, Omega);
    const BranchTrack k1 = continue_branch(b1, t_grid, eta0, G, Omega);
    const double log_norm = -0.5 * std::log(2 * j + 1) + 0.5 * std::log(j / (2 * j + 1));
    constexpr double kCausticGuard = 1e-3;

    std::vector<SemiclassicalEcho> out;
    out.reserve(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double t = t_grid[i];
        SemiclassicalEcho e;
        e.t = t;
        std::vector<cplx> logs;
        auto add = [&](const SaddleSolution& s) {
            const Prefactor p = van_vleck_prefactor(s, G, Omega);
            if (p.divergent) {
                e.near_caustic = true;
                return;
            }
            logs.push_back(log_norm - 0.5 * std::log(p.deta_dphi0) + cplx(0, j) * s.action);
        };
        const std::pair<const ReturnMap*, const BranchTrack*> parts[] = {{&m0, &k0}, {&m1, &k1}};
        for (const auto& [map, track] : parts) {
            if (std::abs(t - map->caustic().t) < kCausticGuard) e.near_caustic = true;
            if (map->allowed(t)) {
                for (const auto& s : map->real_saddles(t)) add(s);
            } else if (track->solutions[i].converged) {
                add(track->solutions[i]);
            } else {
                e.missing_branch = true;
            }
        }
        e.n_saddles = static_cast<int>(logs.size());
        if (logs.empty()) {
            e.log_L = -std::numeric_limits<double>::infinity();
        } else {
            double top = -std::numeric_limits<double>::infinity();
            for (const auto& l : logs) top = std::max(top, l.real());
            cplx sum = 0.0;
            for (const auto& l : logs) sum += std::exp(l - top);
            e.log_L = 2.0 * (top + std::log(std::abs(sum)));
        }
        e.L = std::exp(e.log_L);
        e.r = -e.log_L / j;
        out.push_back(e);
    }
    return out;
}

}  // namespace darkband
