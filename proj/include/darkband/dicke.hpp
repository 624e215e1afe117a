#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "darkband/tridiag.hpp"

namespace darkband {

enum class RateNorm { PerJ, PerN };

// Symmetric spin-j sector; stored through 2j so half-integers are exact.
class DickeSpace {
public:
    explicit DickeSpace(int two_j);
    static DickeSpace from_j(double j);

    int two_j() const noexcept { return two_j_; }
    double j() const noexcept { return 0.5 * two_j_; }
    Eigen::Index dim() const noexcept { return two_j_ + 1; }
    // Index i in [0, dim) holds m = -j + i.
    double m_of(Eigen::Index i) const noexcept { return -j() + static_cast<double>(i); }
    Eigen::Index index_of(double m) const;

private:
    int two_j_;
};

struct SpinState {
    DickeSpace space;
    Eigen::VectorXcd amp;

    double norm() const { return amp.norm(); }
    static SpinState fock(const DickeSpace& space, double m);
};

struct QuenchConfig {
    double G = 1.0;
    double Omega = 1.0;
    DickeSpace space{160};
    double m0 = 48.0;
    // Physical times in units of 1/frequency; times[0] >= 0, strictly increasing.
    std::vector<double> times;
    RateNorm norm = RateNorm::PerJ;
    int workers = 1;

    void validate() const;
};

// Nearest allowed m to 0.6 j; ties go toward +infinity.
double default_m0(const DickeSpace& space, double fraction = 0.6);

Tridiagonal build_hamiltonian(const DickeSpace& space, double G, double Omega);

SpinState evolve(const EigenSystem& es, const SpinState& psi0, double t);

// Below this echo values are reported as underflow.
inline constexpr double kUnderflowFloor = 1e-300;

struct EchoSample {
    double t = 0.0;
    double L = 0.0;
    bool underflow = false;
};

std::vector<EchoSample> loschmidt(const QuenchConfig& cfg);
// Same as above with a precomputed spectrum.
std::vector<EchoSample> loschmidt(const QuenchConfig& cfg, const EigenSystem& es);

struct RateSample {
    double t = 0.0;
    double r = 0.0;
    bool underflow = false;
};

std::vector<RateSample> rate_function(const std::vector<EchoSample>& echo, const DickeSpace& space,
                                      RateNorm norm);

// Rows are m = -j..j, columns follow cfg.times.
Eigen::MatrixXd fock_map(const QuenchConfig& cfg);
Eigen::MatrixXd fock_map(const QuenchConfig& cfg, const EigenSystem& es);

}  // namespace darkband
