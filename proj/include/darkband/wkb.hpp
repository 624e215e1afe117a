#pragma once

#include <vector>

#include "darkband/dicke.hpp"

namespace darkband {

// Return-trajectory class: k = 0 passes the upper turning point once
// (l = +1), k = 1 passes the lower one (l = -1).
struct ActionBranch {
    int k = 0;
    int l = +1;
    double eta0 = 0.6;

    static ActionBranch first(double eta0) { return {0, +1, eta0}; }
    static ActionBranch second(double eta0) { return {1, -1, eta0}; }
    void validate() const;
};

// Half-width of the separatrix exclusion window, in units of G.
inline constexpr double kSeparatrixWindow = 1e-3;

bool near_separatrix(double eps, double G);

// Principal arccos branch of the momentum angle, in [0, pi].
double momentum_branch(double eps, double eta, double G, double Omega);

// Positive root of eps = (G/2) eta^2 + Omega sqrt(1 - eta^2).
double turning_point(double eps, double G, double Omega);

// Integral of phi(eps, eta') from the phi = 0 turning point to eta.
double reduced_action(double eps, double eta, double G, double Omega);

struct EnergyRange {
    double lo = 0.0;
    double hi = 0.0;
};

// Global extrema of the classical energy on the sphere.
EnergyRange spectrum_range(double G, double Omega);
// Energies reachable from latitude eta0.
EnergyRange allowed_window(double eta0, double G, double Omega);

// Phase-space area of {H <= eps}; runs from 0 to 4 pi.
double round_trip_action(double eps, double G, double Omega);
// Period of the orbit at energy eps, from the time integral.
double orbit_period(double eps, double G, double Omega);

struct WkbLevel {
    int n = 0;
    double eps = 0.0;
    bool approximate = false;  // inside the separatrix window
};

std::vector<WkbLevel> bohr_sommerfeld(const DickeSpace& space, double G, double Omega);

// Action of a branch as a function of energy; its energy derivative is the
// return time. Away from eps = G/2 it is smooth; across it the value jumps by
// a multiple of 2 pi (1 - eta0) that leaves the quantum phase unchanged.
double branch_action(double eps, const ActionBranch& branch, double G, double Omega);

// Time spent above (up = true) or below eta0 on the orbit through (eta0, eps),
// from the direct time integral.
double excursion_time(double eps, double eta0, bool up, double G, double Omega);

// T = d(branch_action)/d(eps) by Richardson-extrapolated differences with
// step 1e-5 Omega; inside the separatrix window the time integral is used.
double return_time(double eps, const ActionBranch& branch, double G, double Omega);

struct CausticPoint {
    double t = 0.0;
    double eps = 0.0;
};

// Extremum of T over the allowed window: maximum for k = 0, minimum for k = 1.
CausticPoint caustic_time(const ActionBranch& branch, double G, double Omega);

struct StationarySet {
    std::vector<double> eps;
    bool degenerate = false;
};

StationarySet stationary_energies(double t, const ActionBranch& branch, double G, double Omega);

}  // namespace darkband
