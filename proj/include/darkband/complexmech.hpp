#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "darkband/wkb.hpp"

namespace darkband {

using cplx = std::complex<double>;

// s carries the value of sqrt(1 - eta^2) continued along the path, so the
// square-root branch never has to be chosen from a cut.
struct ComplexPhasePoint {
    cplx phi;
    cplx eta;
    cplx s;
};

struct ComplexEnd {
    ComplexPhasePoint point;
    // Per-particle action S = -int phi d eta - E t along the path.
    cplx action;
    cplx energy;
    double max_energy_drift = 0.0;
};

inline constexpr double kComplexTol = 1e-12;

ComplexEnd integrate_complex(cplx phi0, double eta0, double t_end, double G, double Omega,
                             double tol = kComplexTol);

// Pointwise samples, used for reflection and conservation checks.
std::vector<ComplexEnd> integrate_complex_path(cplx phi0, double eta0, const std::vector<double>& times,
                                               double G, double Omega, double tol = kComplexTol);

struct SaddleSolution {
    double t = 0.0;
    ActionBranch branch;
    double eta_target = 0.0;
    cplx phi0;
    cplx action;
    cplx energy;
    bool converged = false;
    bool degenerate = false;  // Jacobian nearly singular (caustic)
    double residual = 0.0;
};

// Newton iteration on (Re phi0, Im phi0) so that eta(t) = eta_target, with a
// forward-difference Jacobian (step 1e-7). Returns the raw root; see
// physical_branch for the decaying-partner selection.
SaddleSolution shoot_return(double t, const ActionBranch& branch, double eta_target, cplx seed, double G,
                            double Omega, int max_iter = 40);

// Reflects a solution with Im(action) < 0 onto its conjugate partner.
SaddleSolution physical_branch(SaddleSolution sol);

// Fold of the class-k return map at the target latitude: maximum of the
// return time over phi0 in (0, pi) for k = 0, minimum over (pi, 2 pi) for k = 1.
struct ReturnCaustic {
    double t = 0.0;
    double phi0 = 0.0;
};
ReturnCaustic locate_caustic(const ActionBranch& branch, double eta_target, double G, double Omega);

// Real returning trajectories of class k at time t, found from a tabulated
// return-time map and polished by Newton.
class ReturnMap {
public:
    ReturnMap(const ActionBranch& branch, double eta_target, double G, double Omega, std::size_t n_grid = 256);
    const ReturnCaustic& caustic() const { return caustic_; }
    // Whether t lies on the classically allowed side of the caustic.
    bool allowed(double t) const;
    std::vector<SaddleSolution> real_saddles(double t) const;

private:
    ActionBranch branch_;
    double eta_target_, G_, Omega_;
    std::vector<double> phi_, T_;
    ReturnCaustic caustic_;
};

struct BranchTrack {
    std::vector<SaddleSolution> solutions;  // one per grid time
    std::optional<std::size_t> break_index;
    ReturnCaustic caustic;
};

// Homotopy continuation in t, starting at the caustic (seed phi0* + 0.01 i)
// and marching into the forbidden side; allowed-side grid points carry a
// real saddle.
BranchTrack continue_branch(const ActionBranch& branch, const std::vector<double>& t_grid, double eta_target,
                            double G, double Omega);

// Solve at an arbitrary time, seeded from the nearest solutions in a track.
SaddleSolution solve_near(const BranchTrack& track, double t, double G, double Omega);

// r_k = 2 Im(action); requires a converged solution.
double branch_rate(const SaddleSolution& sol);

struct Prefactor {
    double value = 0.0;  // |d phi0 / d eta(t)|^{1/2}
    cplx deta_dphi0;
    bool divergent = false;
};

Prefactor van_vleck_prefactor(const SaddleSolution& sol, double G, double Omega, double h = 1e-5);

struct RateCurve {
    std::vector<double> t;
    std::vector<double> r0, r1, r;
    std::vector<bool> valid;
    std::optional<double> kink_t;
};

RateCurve asymptotic_rate(const std::vector<double>& t_grid, double eta0, double G, double Omega);

// Time in [a, b] where two branch rates cross, by bisection to t_tol.
double branch_crossing(const BranchTrack& k0, const BranchTrack& k1, double a, double b, double G, double Omega,
                       double t_tol = 1e-8);

struct SemiclassicalEcho {
    double t = 0.0;
    double log_L = 0.0;
    double L = 0.0;
    double r = 0.0;  // -log L / j
    int n_saddles = 0;
    bool near_caustic = false;
    bool missing_branch = false;
};

// Coherent Van Vleck sum over the k = 0, 1 saddles of the echo return to eta0.
std::vector<SemiclassicalEcho> semiclassical_loschmidt(double j, const std::vector<double>& t_grid, double eta0,
                                                       double G, double Omega);

}  // namespace darkband
