#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "darkband/dicke.hpp"
#include "darkband/wkb.hpp"

namespace darkband {

enum class SurfaceSource { Exact, Branch0, Branch1 };

std::string to_string(SurfaceSource s);

// Rows follow etas, columns follow times. Masked cells hold NaN.
struct RateSurface {
    std::vector<double> times;
    std::vector<double> etas;
    Eigen::MatrixXd r;
    SurfaceSource source = SurfaceSource::Exact;
    double j = 0.0;

    bool valid(Eigen::Index row, Eigen::Index col) const { return !std::isnan(r(row, col)); }
};

// r(t, m/j) = -ln |<j, m|psi(t)>|^2 / j (or / 2j under per-N norm).
RateSurface rate_surface_exact(const QuenchConfig& cfg);

// r_k(t, eta) = 2 Im S for trajectories of class k returning to latitude eta.
// Rows whose caustic cannot be located, and cells past a continuation break, are masked.
RateSurface branch_rate_surface(const ActionBranch& branch, const std::vector<double>& t_grid,
                                const std::vector<double>& eta_grid, double G, double Omega, int workers = 1);

struct CurvePoint {
    double t = 0.0;
    double eta = 0.0;
};

// Zero contour of r0 - r1 where both rates are valid and positive, ordered by eta then t.
std::vector<CurvePoint> switching_line(const RateSurface& r0, const RateSurface& r1);

struct DptResult {
    bool found = false;
    double t_c = 0.0;
    double r_at_tc = 0.0;
};

// Root of r0 - r1 in [t_lo, t_hi] by bisection; found = false without a sign change.
DptResult locate_dpt(const std::function<double(double)>& r0, const std::function<double(double)>& r1, double t_lo,
                     double t_hi, double t_tol = 1e-8);

// Same from complex-branch continuation at eta0, scanning n_steps points between the two caustics.
DptResult locate_dpt(double eta0, double G, double Omega, std::size_t n_steps = 64);

struct Extrapolation {
    double r_inf = 0.0;
    double error = 0.0;
    double slope = 0.0;
    double curvature = 0.0;
    double rms_residual = 0.0;
    bool low_confidence = false;
};

// Known O(ln j / j) part of a per-j rate: one evanescent saddle gives ln((2j+1)^2 / j) / j,
// interfering real saddles give ln(2j+1) / j.
enum class PrefactorModel { None, Evanescent, Oscillatory };

double prefactor_offset(double j, PrefactorModel model);

// Least-squares fit of r(j) - offset(j) = a + b/j (+ c/j^2 with four or more sizes) at fixed t.
// low_confidence flags data that is not monotone in j.
Extrapolation finite_size_extrapolate(const std::vector<double>& js, const std::vector<double>& rs,
                                      PrefactorModel model = PrefactorModel::Evanescent);

}  // namespace darkband
