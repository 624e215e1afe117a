#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace darkband {

struct PhasePoint {
    double phi = 0.0;
    double eta = 0.0;
};

// Couplings of the classical Hamiltonian. The default is
// H = (G/2) eta^2 + Omega sqrt(1-eta^2) cos(phi); legacy_sign flips the
// sign of the quadratic term.
struct ClassicalModel {
    double G = 1.0;
    double Omega = 1.0;
    bool legacy_sign = false;

    double g_eff() const { return legacy_sign ? -G : G; }
};

double classical_energy(const PhasePoint& p, const ClassicalModel& m);
inline double classical_energy(const PhasePoint& p, double G, double Omega) {
    return classical_energy(p, ClassicalModel{G, Omega, false});
}

// (dphi/dt, deta/dt). Throws PoleError for |eta| >= 1 - 1e-12.
std::array<double, 2> flow_rhs(const PhasePoint& p, const ClassicalModel& m);

std::array<double, 3> bloch_xyz(const PhasePoint& p);
PhasePoint from_xyz(const std::array<double, 3>& r);

struct Trajectory {
    std::vector<double> times;
    std::vector<PhasePoint> points;
    double energy = 0.0;
    double max_drift = 0.0;
};

// Samples at the given times (ascending, first >= 0). The flow is integrated
// in Cartesian coordinates on the unit sphere, which has no pole singularity.
Trajectory integrate(const PhasePoint& p0, const std::vector<double>& sample_times, double tol,
                     const ClassicalModel& m);
// Uniform samples on [0, t_end].
Trajectory integrate(const PhasePoint& p0, double t_end, double tol, const ClassicalModel& m,
                     std::size_t n_samples = 201);

// Times in (0, t_end] where eta(t) crosses `level`, with direction +1/-1.
struct Crossing {
    double t = 0.0;
    int direction = 0;
};
std::vector<Crossing> eta_crossings(const PhasePoint& p0, double t_end, double level,
                                    const ClassicalModel& m, double tol = 1e-12);

// Return of a trajectory to eta_target after one turning point. Class 0
// starts upward (phi0 in (0, pi)), passes its upper turning point and comes
// down through the target; class 1 is the mirror image through the lower
// turning point. Returns a negative value when no such return exists before
// t_max.
double class_return_time(int k, double phi0, double eta0, double eta_target, const ClassicalModel& m,
                         double t_max, double tol = 1e-12);

struct Ensemble {
    std::vector<double> times;
    std::vector<double> phi0;
    Eigen::MatrixXd phi;  // rows: times, cols: trajectories
    Eigen::MatrixXd eta;
    std::vector<bool> failed;  // per trajectory, integration error flagged
};

Ensemble ensemble(double eta0, std::size_t n_traj, const std::vector<double>& times,
                  const ClassicalModel& m, int workers = 1, double tol = 1e-10);

struct Fold {
    double eta_star = 0.0;
    double phi0 = 0.0;
    bool is_maximum = false;
    bool is_cusp = false;
};

struct FoldSet {
    std::vector<Fold> folds;
    bool degenerate = false;
};

// Stationary points of a periodic snapshot eta(phi0), phi0 uniform on
// [0, 2 pi). Adjacent extrema closer than two grid steps in phi0 and within
// cusp_tol in eta are merged into one fold flagged as a cusp; otherwise such
// clustering raises a resolution error.
FoldSet detect_folds(const std::vector<double>& phi0, const Eigen::VectorXd& eta, double cusp_tol = 5e-3);

struct CuspPoint {
    double t = 0.0;
    double eta = 0.0;
    double phi0 = 0.0;
};

// Times in [t_lo, t_hi] at which the fold count of the eta0 ensemble jumps
// by two, refined by bisection on the count.
std::vector<CuspPoint> locate_cusps(double eta0, const ClassicalModel& m, double t_lo, double t_hi,
                                    std::size_t n_traj = 2048, std::size_t n_scan = 64,
                                    double t_tol = 1e-4);

}  // namespace darkband
