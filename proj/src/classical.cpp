#include "darkband/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "darkband/errors.hpp"
#include "darkband/ode.hpp"
#include "darkband/parallel.hpp"

namespace darkband {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using Vec3 = ode::State<double, 3>;

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    return a < 0 ? a + kTwoPi : a;
}

struct SphereFlow {
    double g;
    double omega;
    Vec3 operator()(double, const Vec3& r) const {
        return {-g * r[1] * r[2], g * r[0] * r[2] - omega * r[2], omega * r[1]};
    }
};

ode::Options options_for(double tol) {
    ode::Options o;
    o.rtol = std::clamp(0.1 * tol, 1e-14, 1e-6);
    o.atol = o.rtol;
    o.hmax = 0.1;
    return o;
}

double sphere_energy(const Vec3& r, const ClassicalModel& m) {
    return 0.5 * m.g_eff() * r[2] * r[2] + m.Omega * r[0];
}

// Root of component `idx` minus level inside one dense step, by bisection.
double refine(const ode::DenseStep<double, 3>& ds, std::size_t idx, double level) {
    double a = ds.t0, b = ds.t1;
    double fa = ds(a)[idx] - level;
    for (int it = 0; it < 200 && std::abs(b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
        const double c = 0.5 * (a + b);
        const double fc = ds(c)[idx] - level;
        if (fc == 0.0) return c;
        if ((fc < 0) == (fa < 0)) {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

double classical_energy(const PhasePoint& p, const ClassicalModel& m) {
    if (std::abs(p.eta) > 1.0) throw ConfigError("classical_energy: |eta| > 1");
    return 0.5 * m.g_eff() * p.eta * p.eta + m.Omega * std::sqrt(1.0 - p.eta * p.eta) * std::cos(p.phi);
}

std::array<double, 2> flow_rhs(const PhasePoint& p, const ClassicalModel& m) {
    if (std::abs(p.eta) >= 1.0 - 1e-12) throw PoleError("flow_rhs: coordinate pole", p.eta);
    const double s = std::sqrt(1.0 - p.eta * p.eta);
    return {m.g_eff() * p.eta - m.Omega * p.eta * std::cos(p.phi) / s, m.Omega * s * std::sin(p.phi)};
}

std::array<double, 3> bloch_xyz(const PhasePoint& p) {
    const double s = std::sqrt(std::max(0.0, 1.0 - p.eta * p.eta));
    return {s * std::cos(p.phi), s * std::sin(p.phi), p.eta};
}

PhasePoint from_xyz(const std::array<double, 3>& r) {
    return PhasePoint{wrap_angle(std::atan2(r[1], r[0])), std::clamp(r[2], -1.0, 1.0)};
}

Trajectory integrate(const PhasePoint& p0, const std::vector<double>& sample_times, double tol,
                     const ClassicalModel& m) {
    if (std::abs(p0.eta) > 1.0) throw ConfigError("integrate: |eta| > 1");
    if (sample_times.empty() || sample_times.front() < 0)
        throw ConfigError("integrate: sample times must be non-empty and non-negative");
    if (!std::is_sorted(sample_times.begin(), sample_times.end()))
        throw ConfigError("integrate: sample times must be ascending");

    Trajectory tr;
    tr.energy = classical_energy(p0, m);
    tr.times = sample_times;
    tr.points.reserve(sample_times.size());
    const SphereFlow flow{m.g_eff(), m.Omega};
    Vec3 r0 = bloch_xyz(p0);

    std::size_t next = 0;
    auto record = [&](const Vec3& r) {
        const PhasePoint p = from_xyz(r);
        tr.points.push_back(p);
        tr.max_drift = std::max(tr.max_drift, std::abs(sphere_energy(r, m) - tr.energy));
    };
    while (next < sample_times.size() && sample_times[next] == 0.0) {
        tr.points.push_back(PhasePoint{wrap_angle(p0.phi), p0.eta});
        ++next;
    }
    if (next < sample_times.size()) {
        try {
            ode::integrate<double, 3>(flow, 0.0, r0, sample_times.back(), options_for(tol),
                                      [&](const ode::DenseStep<double, 3>& ds) {
                                          while (next < sample_times.size() && sample_times[next] <= ds.t1) {
                                              record(ds(sample_times[next]));
                                              ++next;
                                          }
                                          return true;
                                      });
        } catch (const ode::StepUnderflow& e) {
            throw PoleError("integrate: step underflow", e.time());
        }
    }
    if (tr.max_drift > tol)
        throw NumericError("integrate: energy drift " + std::to_string(tr.max_drift) + " exceeds tolerance");
    return tr;
}

Trajectory integrate(const PhasePoint& p0, double t_end, double tol, const ClassicalModel& m,
                     std::size_t n_samples) {
    if (!(t_end > 0)) throw ConfigError("integrate: t_end must be positive");
    if (n_samples < 2) throw ConfigError("integrate: need at least two samples");
    std::vector<double> ts(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i)
        ts[i] = t_end * static_cast<double>(i) / static_cast<double>(n_samples - 1);
    return integrate(p0, ts, tol, m);
}

std::vector<Crossing> eta_crossings(const PhasePoint& p0, double t_end, double level, const ClassicalModel& m,
                                    double tol) {
    std::vector<Crossing> out;
    const SphereFlow flow{m.g_eff(), m.Omega};
    ode::integrate<double, 3>(flow, 0.0, bloch_xyz(p0), t_end, options_for(tol),
                              [&](const ode::DenseStep<double, 3>& ds) {
                                  const double a = ds(ds.t0)[2] - level;
                                  const double b = ds(ds.t1)[2] - level;
                                  if (a != 0.0 && (a < 0) != (b < 0))
                                      out.push_back(Crossing{refine(ds, 2, level), b > a ? +1 : -1});
                                  else if (a == 0.0 && ds.t0 > 0.0 && b != 0.0)
                                      out.push_back(Crossing{ds.t0, b > 0 ? +1 : -1});
                                  return true;
                              });
    return out;
}

double class_return_time(int k, double phi0, double eta0, double eta_target, const ClassicalModel& m,
                         double t_max, double tol) {
    if (k != 0 && k != 1) throw ConfigError("class_return_time: class must be 0 or 1");
    const SphereFlow flow{m.g_eff(), m.Omega};
    // Class 0 turns from rising to falling (y goes + to -); class 1 the reverse.
    const int turn_sign = k == 0 ? -1 : +1;
    bool turned = false;
    double result = -1.0;
    const Vec3 r0 = bloch_xyz(PhasePoint{phi0, eta0});
    if ((k == 0 && !(r0[1] > 0)) || (k == 1 && !(r0[1] < 0))) return -1.0;
    ode::integrate<double, 3>(flow, 0.0, r0, t_max, options_for(tol), [&](const ode::DenseStep<double, 3>& ds) {
        const Vec3 ya = ds(ds.t0), yb = ds(ds.t1);
        double t_start = ds.t0;
        if (!turned) {
            const bool flipped = turn_sign < 0 ? (ya[1] > 0 && yb[1] <= 0) : (ya[1] < 0 && yb[1] >= 0);
            if (!flipped) return true;
            turned = true;
            t_start = refine(ds, 1, 0.0);
        }
        const double a = ds(t_start)[2] - eta_target;
        const double b = yb[2] - eta_target;
        const bool crossed = turn_sign < 0 ? (a > 0 && b <= 0) : (a < 0 && b >= 0);
        if (crossed) {
            double lo = t_start, hi = ds.t1;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                const double c = 0.5 * (lo + hi);
                const double fc = ds(c)[2] - eta_target;
                if ((fc > 0) == (a > 0)) lo = c;
                else hi = c;
            }
            result = 0.5 * (lo + hi);
            return false;
        }
        return true;
    });
    return result;
}

Ensemble ensemble(double eta0, std::size_t n_traj, const std::vector<double>& times, const ClassicalModel& m,
                  int workers, double tol) {
    if (n_traj < 8) throw ConfigError("ensemble: need at least 8 trajectories");
    if (std::abs(eta0) >= 1.0) throw ConfigError("ensemble: |eta0| must be below 1");
    Ensemble ens;
    ens.times = times;
    ens.phi0.resize(n_traj);
    ens.phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(n_traj));
    ens.eta = ens.phi;
    ens.failed.assign(n_traj, false);
    std::vector<char> failed(n_traj, 0);
    for (std::size_t i = 0; i < n_traj; ++i) ens.phi0[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(n_traj);
    parallel_for(n_traj, workers, [&](std::size_t i) {
        try {
            const Trajectory tr = integrate(PhasePoint{ens.phi0[i], eta0}, times, tol, m);
            for (std::size_t k = 0; k < times.size(); ++k) {
                ens.phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = tr.points[k].phi;
                ens.eta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = tr.points[k].eta;
            }
        } catch (const NumericError&) {
            failed[i] = 1;
            ens.phi.col(static_cast<Eigen::Index>(i)).setConstant(std::nan(""));
            ens.eta.col(static_cast<Eigen::Index>(i)).setConstant(std::nan(""));
        }
    });
    for (std::size_t i = 0; i < n_traj; ++i) ens.failed[i] = failed[i] != 0;
    return ens;
}

FoldSet detect_folds(const std::vector<double>& phi0, const Eigen::VectorXd& eta, double cusp_tol) {
    const std::size_t n = phi0.size();
    if (n < 8 || static_cast<std::size_t>(eta.size()) != n)
        throw ConfigError("detect_folds: need matching grids of at least 8 points");
    FoldSet out;
    if (eta.maxCoeff() - eta.minCoeff() < 1e-13) {
        out.degenerate = true;
        return out;
    }
    const double h = kTwoPi / static_cast<double>(n);
    auto at = [&](std::ptrdiff_t i) {
        const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);
        return eta(static_cast<Eigen::Index>(((i % nn) + nn) % nn));
    };

    // Sample extrema of the periodic sequence, refined by a parabola.
    std::vector<Fold> raw;
    std::vector<std::ptrdiff_t> where;
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const double dl = at(i) - at(i - 1);
        const double dr = at(i + 1) - at(i);
        const bool is_max = dl > 0 && dr <= 0;
        const bool is_min = dl < 0 && dr >= 0;
        if (!is_max && !is_min) continue;
        const double a = at(i - 1), b = at(i), c = at(i + 1);
        const double curv = a - 2 * b + c;
        double off = 0.0, val = b;
        if (curv != 0.0) {
            off = 0.5 * (a - c) / curv;
            val = b - 0.25 * (a - c) * off;
        }
        raw.push_back(Fold{val, phi0[static_cast<std::size_t>(i)] + off * h, is_max, false});
        where.push_back(i);
    }

    // Merge clustered extremum pairs (a just-born or dying cusp).
    const std::size_t r = raw.size();
    std::vector<bool> used(r, false);
    for (std::size_t a = 0; a < r; ++a) {
        if (used[a]) continue;
        const std::size_t b = (a + 1) % r;
        if (r >= 2 && b != a && !used[b]) {
            std::ptrdiff_t gap = where[b] - where[a];
            if (gap < 0) gap += static_cast<std::ptrdiff_t>(n);
            if (gap <= 2) {
                if (std::abs(raw[a].eta_star - raw[b].eta_star) > cusp_tol)
                    throw NumericError("detect_folds: under-resolved fold pair; increase the trajectory count");
                Fold c = raw[a];
                c.eta_star = 0.5 * (raw[a].eta_star + raw[b].eta_star);
                c.is_cusp = true;
                out.folds.push_back(c);
                used[a] = used[b] = true;
                continue;
            }
        }
        out.folds.push_back(raw[a]);
        used[a] = true;
    }
    return out;
}

std::vector<CuspPoint> locate_cusps(double eta0, const ClassicalModel& m, double t_lo, double t_hi,
                                    std::size_t n_traj, std::size_t n_scan, double t_tol) {
    if (!(t_hi > t_lo) || n_scan < 2) throw ConfigError("locate_cusps: bad time window");
    auto snapshot = [&](double t) {
        const Ensemble e = ensemble(eta0, n_traj, {t}, m);
        return std::pair{e.phi0, Eigen::VectorXd(e.eta.row(0).transpose())};
    };
    auto count = [&](double t) {
        const auto [p, e] = snapshot(t);
        std::size_t c = 0;
        for (const auto& f : detect_folds(p, e).folds) c += f.is_cusp ? 0 : 1;
        return c;
    };
    std::vector<CuspPoint> out;
    double prev_t = t_lo;
    std::size_t prev_c = count(t_lo);
    for (std::size_t s = 1; s <= n_scan; ++s) {
        const double t = t_lo + (t_hi - t_lo) * static_cast<double>(s) / static_cast<double>(n_scan);
        const std::size_t c = count(t);
        if (c == prev_c + 2 || c + 2 == prev_c) {
            const bool born = c > prev_c;
            double a = prev_t, b = t;
            while (b - a > t_tol) {
                const double mid = 0.5 * (a + b);
                const std::size_t cm = count(mid);
                if (cm == prev_c) a = mid;
                else b = mid;
            }
            // At the birth side the new pair is the closest max/min pair.
            const double tc = born ? b : a;
            const auto [p, e] = snapshot(tc);
            const FoldSet fs = detect_folds(p, e);
            CuspPoint best{tc, 0.0, 0.0};
            double gap = 1e300;
            const auto& f = fs.folds;
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (f[i].is_cusp) {
                    best = CuspPoint{tc, f[i].eta_star, f[i].phi0};
                    gap = 0.0;
                    break;
                }
                const std::size_t jn = (i + 1) % f.size();
                if (jn == i || f[i].is_maximum == f[jn].is_maximum) continue;
                double dphi = f[jn].phi0 - f[i].phi0;
                if (dphi < 0) dphi += kTwoPi;
                if (dphi < gap) {
                    gap = dphi;
                    best = CuspPoint{tc, 0.5 * (f[i].eta_star + f[jn].eta_star), 0.5 * (f[i].phi0 + f[jn].phi0)};
                }
            }
            out.push_back(best);
        }
        prev_t = t;
        prev_c = c;
    }
    return out;
}

}  // namespace darkband
