#include "darkband/scan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "darkband/complexmech.hpp"
#include "darkband/errors.hpp"
#include "darkband/parallel.hpp"

namespace darkband {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool forbidden(const RateSurface& s, Eigen::Index i, Eigen::Index k) { return s.valid(i, k) && s.r(i, k) > 0.0; }

}  // namespace

std::string to_string(SurfaceSource s) {
    switch (s) {
        case SurfaceSource::Exact: return "exact";
        case SurfaceSource::Branch0: return "branch0";
        case SurfaceSource::Branch1: return "branch1";
    }
    return "unknown";
}

RateSurface rate_surface_exact(const QuenchConfig& cfg) {
    cfg.validate();
    const Eigen::MatrixXd P = fock_map(cfg);
    RateSurface s;
    s.times = cfg.times;
    s.source = SurfaceSource::Exact;
    s.j = cfg.space.j();
    const double scale = cfg.norm == RateNorm::PerJ ? cfg.space.j() : 2.0 * cfg.space.j();
    s.r.resize(P.rows(), P.cols());
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        s.etas.push_back(cfg.space.m_of(i) / cfg.space.j());
        for (Eigen::Index k = 0; k < P.cols(); ++k) s.r(i, k) = -std::log(std::max(P(i, k) * P(i, k), kUnderflowFloor)) / scale;
    }
    return s;
}

RateSurface branch_rate_surface(const ActionBranch& branch, const std::vector<double>& t_grid,
                                const std::vector<double>& eta_grid, double G, double Omega, int workers) {
    branch.validate();
    if (t_grid.empty() || eta_grid.empty()) throw ConfigError("branch_rate_surface: empty grid");
    if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw ConfigError("branch_rate_surface: times must ascend");
    RateSurface s;
    s.times = t_grid;
    s.etas = eta_grid;
    s.source = branch.k == 0 ? SurfaceSource::Branch0 : SurfaceSource::Branch1;
    s.r = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(eta_grid.size()),
                                    static_cast<Eigen::Index>(t_grid.size()), kNaN);
    parallel_for(eta_grid.size(), workers, [&](std::size_t row) {
        const double eta = eta_grid[row];
        if (!(std::abs(eta) < 1.0)) return;
        BranchTrack track;
        try {
            track = continue_branch(branch, t_grid, eta, G, Omega);
        } catch (const NumericError&) {
            return;
        }
        for (std::size_t k = 0; k < t_grid.size(); ++k) {
            const auto& sol = track.solutions[k];
            if (sol.converged) s.r(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = branch_rate(sol);
        }
    });
    return s;
}

std::vector<CurvePoint> switching_line(const RateSurface& r0, const RateSurface& r1) {
    if (r0.r.rows() != r1.r.rows() || r0.r.cols() != r1.r.cols() || r0.times != r1.times || r0.etas != r1.etas)
        throw ConfigError("switching_line: surfaces live on different grids");
    std::vector<CurvePoint> out;
    auto both = [&](Eigen::Index i, Eigen::Index k) { return forbidden(r0, i, k) && forbidden(r1, i, k); };
    auto diff = [&](Eigen::Index i, Eigen::Index k) { return r0.r(i, k) - r1.r(i, k); };
    const Eigen::Index ne = r0.r.rows(), nt = r0.r.cols();
    for (Eigen::Index i = 0; i < ne; ++i)
        for (Eigen::Index k = 0; k + 1 < nt; ++k) {
            if (!both(i, k) || !both(i, k + 1)) continue;
            const double a = diff(i, k), b = diff(i, k + 1);
            if (a == 0.0 || (a < 0) == (b < 0)) continue;
            const double w = a / (a - b);
            out.push_back({r0.times[k] + w * (r0.times[k + 1] - r0.times[k]), r0.etas[i]});
        }
    for (Eigen::Index k = 0; k < nt; ++k)
        for (Eigen::Index i = 0; i + 1 < ne; ++i) {
            if (!both(i, k) || !both(i + 1, k)) continue;
            const double a = diff(i, k), b = diff(i + 1, k);
            if (a == 0.0 || (a < 0) == (b < 0)) continue;
            const double w = a / (a - b);
            out.push_back({r0.times[k], r0.etas[i] + w * (r0.etas[i + 1] - r0.etas[i])});
        }
    std::sort(out.begin(), out.end(), [](const CurvePoint& p, const CurvePoint& q) {
        return p.eta != q.eta ? p.eta < q.eta : p.t < q.t;
    });
    return out;
}

DptResult locate_dpt(const std::function<double(double)>& r0, const std::function<double(double)>& r1, double t_lo,
                     double t_hi, double t_tol) {
    if (!(t_lo < t_hi)) throw ConfigError("locate_dpt: empty bracket");
    auto d = [&](double t) { return r0(t) - r1(t); };
    double a = t_lo, b = t_hi, fa = d(a);
    const double fb = d(b);
    DptResult res;
    if (fa == 0.0 || fb == 0.0) {
        res.found = true;
        res.t_c = fa == 0.0 ? a : b;
        res.r_at_tc = r0(res.t_c);
        return res;
    }
    if ((fa < 0) == (fb < 0)) return res;
    while (b - a > t_tol) {
        const double m = 0.5 * (a + b);
        const double fm = d(m);
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    res.found = true;
    res.t_c = 0.5 * (a + b);
    res.r_at_tc = 0.5 * (r0(res.t_c) + r1(res.t_c));
    return res;
}

DptResult locate_dpt(double eta0, double G, double Omega, std::size_t n_steps) {
    if (n_steps < 4) throw ConfigError("locate_dpt: need at least 4 scan steps");
    const ActionBranch b0 = ActionBranch::first(eta0), b1 = ActionBranch::second(eta0);
    const double t1 = locate_caustic(b0, eta0, G, Omega).t;
    const double t2 = locate_caustic(b1, eta0, G, Omega).t;
    if (!(t1 < t2)) return {};
    std::vector<double> grid(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i)
        grid[i] = t1 + (t2 - t1) * (static_cast<double>(i) + 0.5) / static_cast<double>(n_steps);
    const BranchTrack k0 = continue_branch(b0, grid, eta0, G, Omega);
    const BranchTrack k1 = continue_branch(b1, grid, eta0, G, Omega);
    auto rate = [&](const BranchTrack& tr) {
        return [&, tr_ptr = &tr](double t) {
            const SaddleSolution s = solve_near(*tr_ptr, t, G, Omega);
            if (!s.converged) throw NumericError("locate_dpt: shooting failed");
            return branch_rate(s);
        };
    };
    const auto f0 = rate(k0), f1 = rate(k1);
    for (std::size_t i = 0; i + 1 < n_steps; ++i) {
        const auto& a0 = k0.solutions[i];
        const auto& b0s = k0.solutions[i + 1];
        const auto& a1 = k1.solutions[i];
        const auto& b1s = k1.solutions[i + 1];
        if (!(a0.converged && b0s.converged && a1.converged && b1s.converged)) continue;
        const double da = branch_rate(a0) - branch_rate(a1);
        const double db = branch_rate(b0s) - branch_rate(b1s);
        if ((da < 0) != (db < 0)) return locate_dpt(f0, f1, grid[i], grid[i + 1]);
    }
    return {};
}

double prefactor_offset(double j, PrefactorModel model) {
    if (!(j > 0)) throw ConfigError("prefactor_offset: j must be positive");
    switch (model) {
        case PrefactorModel::None: return 0.0;
        case PrefactorModel::Evanescent: return std::log((2 * j + 1) * (2 * j + 1) / j) / j;
        case PrefactorModel::Oscillatory: return std::log(2 * j + 1) / j;
    }
    return 0.0;
}

Extrapolation finite_size_extrapolate(const std::vector<double>& js, const std::vector<double>& rs,
                                      PrefactorModel model) {
    if (js.size() != rs.size()) throw ConfigError("finite_size_extrapolate: size mismatch");
    std::vector<double> sorted = js;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || js.size() < 3)
        throw ConfigError("finite_size_extrapolate: need at least 3 distinct sizes");
    const Eigen::Index n = static_cast<Eigen::Index>(js.size());
    const Eigen::Index p = n >= 4 ? 3 : 2;
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double j = js[static_cast<std::size_t>(i)];
        if (!(j > 0)) throw ConfigError("finite_size_extrapolate: sizes must be positive");
        X(i, 0) = 1.0;
        X(i, 1) = 1.0 / j;
        if (p == 3) X(i, 2) = 1.0 / (j * j);
        y(i) = rs[static_cast<std::size_t>(i)] - prefactor_offset(j, model);
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    const Eigen::VectorXd c = qr.solve(y);
    const Eigen::VectorXd res = y - X * c;
    Extrapolation e;
    e.r_inf = c(0);
    e.slope = c(1);
    e.curvature = p == 3 ? c(2) : 0.0;
    e.rms_residual = std::sqrt(res.squaredNorm() / static_cast<double>(n));
    const double dof = static_cast<double>(n - p);
    const Eigen::MatrixXd cov = (X.transpose() * X).inverse();
    if (dof > 0) {
        e.error = std::sqrt(res.squaredNorm() / dof * cov(0, 0));
    } else {
        e.error = 0.0;
    }
    // Data that does not approach the limit monotonically in 1/j is not in the asymptotic regime.
    std::vector<std::pair<double, double>> by_j;
    for (Eigen::Index i = 0; i < n; ++i) by_j.emplace_back(js[static_cast<std::size_t>(i)], y(i));
    std::sort(by_j.begin(), by_j.end());
    bool up = true, down = true;
    for (std::size_t i = 1; i < by_j.size(); ++i) {
        up = up && by_j[i].second >= by_j[i - 1].second;
        down = down && by_j[i].second <= by_j[i - 1].second;
    }
    e.low_confidence = !(up || down);
    return e;
}

}  // namespace darkband
