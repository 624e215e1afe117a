#include "darkband/dicke.hpp"

#include <cmath>

#include "darkband/errors.hpp"
#include "darkband/parallel.hpp"

namespace darkband {

DickeSpace::DickeSpace(int two_j) : two_j_(two_j) {
    if (two_j < 0) throw ConfigError("DickeSpace: 2j must be non-negative");
}

DickeSpace DickeSpace::from_j(double j) {
    const double tj = 2.0 * j;
    if (!(tj >= 0) || std::abs(tj - std::round(tj)) > 1e-12)
        throw ConfigError("DickeSpace: j must be a non-negative half-integer");
    return DickeSpace(static_cast<int>(std::lround(tj)));
}

Eigen::Index DickeSpace::index_of(double m) const {
    const double i = m + j();
    if (std::abs(i - std::round(i)) > 1e-9 || std::round(i) < 0 || std::round(i) > two_j_)
        throw ConfigError("DickeSpace: m must satisfy |m| <= j with m - j integer");
    return static_cast<Eigen::Index>(std::lround(i));
}

SpinState SpinState::fock(const DickeSpace& space, double m) {
    SpinState s{space, Eigen::VectorXcd::Zero(space.dim())};
    s.amp(space.index_of(m)) = 1.0;
    return s;
}

void QuenchConfig::validate() const {
    space.index_of(m0);
    if (times.empty()) throw ConfigError("QuenchConfig: empty time grid");
    if (times.front() < 0) throw ConfigError("QuenchConfig: times must be non-negative");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ConfigError("QuenchConfig: times must increase strictly");
    if (!std::isfinite(G) || !std::isfinite(Omega)) throw ConfigError("QuenchConfig: non-finite coupling");
}

double default_m0(const DickeSpace& space, double fraction) {
    const double j = space.j();
    // Candidates are -j + integer; pick nearest to fraction*j, ties upward.
    const double x = fraction * j + j;
    double i = std::floor(x + 0.5);
    i = std::clamp(i, 0.0, static_cast<double>(space.two_j()));
    return -j + i;
}

Tridiagonal build_hamiltonian(const DickeSpace& space, double G, double Omega) {
    const Eigen::Index n = space.dim();
    const double j = space.j();
    Tridiagonal h;
    h.diag.resize(n);
    h.off.resize(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = space.m_of(i);
        h.diag(i) = j > 0 ? G / (2.0 * j) * m * m : 0.0;
        if (i + 1 < n) h.off(i) = 0.5 * Omega * std::sqrt(j * (j + 1) - m * (m + 1));
    }
    return h;
}

SpinState evolve(const EigenSystem& es, const SpinState& psi0, double t) {
    if (psi0.amp.size() != es.size()) throw ConfigError("evolve: dimension mismatch");
    if (t < 0) throw ConfigError("evolve: negative time");
    if (t == 0) return psi0;
    Eigen::VectorXcd c = es.vectors.transpose().cast<std::complex<double>>() * psi0.amp;
    for (Eigen::Index n = 0; n < c.size(); ++n) c(n) *= std::polar(1.0, -es.energies(n) * t);
    return SpinState{psi0.space, es.vectors.cast<std::complex<double>>() * c};
}

std::vector<EchoSample> loschmidt(const QuenchConfig& cfg, const EigenSystem& es) {
    cfg.validate();
    const Eigen::Index i0 = cfg.space.index_of(cfg.m0);
    const Eigen::VectorXd w = es.vectors.row(i0).transpose().array().square();
    std::vector<EchoSample> out(cfg.times.size());
    parallel_for(cfg.times.size(), cfg.workers, [&](std::size_t k) {
        const double t = cfg.times[k];
        std::complex<double> a = 0.0;
        for (Eigen::Index n = 0; n < w.size(); ++n) a += w(n) * std::polar(1.0, -es.energies(n) * t);
        double L = t == 0 ? 1.0 : std::min(1.0, std::norm(a));
        out[k] = EchoSample{t, L, L < kUnderflowFloor};
    });
    return out;
}

std::vector<EchoSample> loschmidt(const QuenchConfig& cfg) {
    cfg.validate();
    return loschmidt(cfg, diagonalize(build_hamiltonian(cfg.space, cfg.G, cfg.Omega)));
}

std::vector<RateSample> rate_function(const std::vector<EchoSample>& echo, const DickeSpace& space,
                                      RateNorm norm) {
    if (space.two_j() == 0) throw ConfigError("rate_function: j must be positive");
    const double scale = norm == RateNorm::PerJ ? space.j() : 2.0 * space.j();
    std::vector<RateSample> out;
    out.reserve(echo.size());
    for (const auto& e : echo) {
        const bool under = e.underflow || e.L < kUnderflowFloor;
        const double L = under ? kUnderflowFloor : e.L;
        out.push_back(RateSample{e.t, -std::log(L) / scale, under});
    }
    return out;
}

Eigen::MatrixXd fock_map(const QuenchConfig& cfg, const EigenSystem& es) {
    cfg.validate();
    const SpinState psi0 = SpinState::fock(cfg.space, cfg.m0);
    Eigen::MatrixXd map(cfg.space.dim(), static_cast<Eigen::Index>(cfg.times.size()));
    parallel_for(cfg.times.size(), cfg.workers, [&](std::size_t k) {
        map.col(static_cast<Eigen::Index>(k)) = evolve(es, psi0, cfg.times[k]).amp.cwiseAbs();
    });
    return map;
}

Eigen::MatrixXd fock_map(const QuenchConfig& cfg) {
    cfg.validate();
    return fock_map(cfg, diagonalize(build_hamiltonian(cfg.space, cfg.G, cfg.Omega)));
}

}  // namespace darkband
