#pragma once

#include <complex>

namespace darkband {

// Ai(x) from the Maclaurin series on [-8, 7] (long double) and asymptotic expansions outside.
double airy(double x);

// Integral of exp(i(s^3/3 + x s)) over the real line, on contours rotated by pi/6.
// Equals 2 pi Ai(x); kept as an independent route to airy().
std::complex<double> fold_integral(double x);

inline constexpr double kPearceyWindow = 12.0;

// Integral of exp(i(s^4/4 + y s^2/2 + x s)) over the real line for |x|, |y| <= 12.
std::complex<double> pearcey(double x, double y);

// Viewing angle for a ray with impact parameter h in [0, 1]; order 1 or 2 internal reflections.
double raindrop_deflection(double h, double n, int order);
// d theta / d h of the above.
double raindrop_deflection_slope(double h, double n, int order);

struct RainbowAngles {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double h1 = 0.0;
    double h2 = 0.0;
};

// Primary maximum and secondary minimum of the deflection, in radians.
RainbowAngles rainbow_angles(double n);

struct RainbowParams {
    double n = 4.0 / 3.0;
    double k = 1.0;
    double D1 = 1.0;
    double D2 = 1.0;
    double C1 = 1.0;
    double C2 = 1.0;
    double theta1 = 0.0;
    double theta2 = 0.0;

    // Rainbow angles taken from the ray model at index n.
    static RainbowParams for_index(double n, double k = 1.0, double D1 = 1.0, double D2 = 1.0);
    void validate() const;
};

// Exponential dark-band model |C1 e^{-(2k/3)(D1 (t - t1))^{3/2}} + C2 e^{-(2k/3)(D2 (t2 - t))^{3/2}}|^2.
double dark_band_intensity(double theta, const RainbowParams& p);
// ln of the above, evaluated without underflow.
double dark_band_log_intensity(double theta, const RainbowParams& p);

// Same band from the two Airy tails C_i Ai(z_i) 2 sqrt(pi) z_i^{1/4}, z_i = k^{2/3} D_i |theta - theta_i|.
// Returns the amplitude; the algebraic prefactor is divided out so it shares the exponential model's limit.
double airy_tail_amplitude(double theta, const RainbowParams& p);

struct DarkBandRate {
    double r = 0.0;
    double theta_star = 0.0;
};

// r = min of the two tail exponents per unit k.
DarkBandRate dark_band_rate(double theta, const RainbowParams& p);
// Angle where the two exponents are equal, by bisection.
double dark_band_switch_angle(const RainbowParams& p);

}  // namespace darkband
