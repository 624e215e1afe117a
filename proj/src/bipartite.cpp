#include "darkband/bipartite.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "darkband/errors.hpp"
#include "darkband/parallel.hpp"

namespace darkband {

namespace {

// <m+1| J_+ |m> for spin j.
double raise(double j, double m) { return std::sqrt(std::max(0.0, j * (j + 1) - m * (m + 1))); }

double rate_of(double L, int n, bool& under) {
    under = L < kUnderflowFloor;
    return -std::log(under ? kUnderflowFloor : L) / n;
}

}  // namespace

BipartiteSpace::BipartiteSpace(int n_per_side) : n_(n_per_side) {
    if (n_per_side < 2 || n_per_side % 2 != 0)
        throw ConfigError("BipartiteSpace: atoms per side must be even and >= 2, got " + std::to_string(n_per_side));
}

BipartiteState BipartiteState::product(const SpinState& a, const SpinState& b) {
    if (a.space.two_j() != b.space.two_j()) throw ConfigError("BipartiteState::product: subsystem sizes differ");
    BipartiteSpace space(a.space.two_j());
    BipartiteState s{space, Eigen::VectorXcd(space.dim())};
    for (Eigen::Index i = 0; i < space.side_dim(); ++i)
        for (Eigen::Index k = 0; k < space.side_dim(); ++k) s.amp(space.index(i, k)) = a.amp(i) * b.amp(k);
    return s;
}

Eigen::MatrixXcd BipartiteState::grid() const {
    const Eigen::Index d = space.side_dim();
    // amp is row-major in (m_I, m_S).
    return Eigen::Map<const Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        amp.data(), d, d);
}

Eigen::SparseMatrix<double> build_bipartite_hamiltonian(const BipartiteSpace& space, double G, double Omega) {
    const Eigen::Index d = space.side_dim();
    const double j = space.j_sub();
    const double scale = G / (2.0 * space.n_per_side());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(5 * space.dim()));
    for (Eigen::Index a = 0; a < d; ++a) {
        const double mi = -j + static_cast<double>(a);
        for (Eigen::Index b = 0; b < d; ++b) {
            const double ms = -j + static_cast<double>(b);
            const Eigen::Index row = space.index(a, b);
            const double mz = mi + ms;
            trip.emplace_back(row, row, scale * mz * mz);
            if (a + 1 < d) {
                const double v = 0.5 * Omega * raise(j, mi);
                trip.emplace_back(space.index(a + 1, b), row, v);
                trip.emplace_back(row, space.index(a + 1, b), v);
            }
            if (b + 1 < d) {
                const double v = 0.5 * Omega * raise(j, ms);
                trip.emplace_back(space.index(a, b + 1), row, v);
                trip.emplace_back(row, space.index(a, b + 1), v);
            }
        }
    }
    Eigen::SparseMatrix<double> H(space.dim(), space.dim());
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
}

BipartitePropagator::BipartitePropagator(const BipartiteSpace& space, double G, double Omega) : space_(space) {
    if (space.dim() > kMaxBipartiteDim)
        throw ResourceError("bipartite dimension " + std::to_string(space.dim()) + " exceeds dense budget " +
                            std::to_string(kMaxBipartiteDim));
    const Eigen::MatrixXd H = Eigen::MatrixXd(build_bipartite_hamiltonian(space, G, Omega));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw ConvergenceError("bipartite diagonalization", space.dim(), 0.0);
    energies_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
}

BipartiteState BipartitePropagator::evolve(const BipartiteState& psi0, double t) const {
    if (psi0.amp.size() != space_.dim()) throw ConfigError("BipartitePropagator::evolve: state size mismatch");
    Eigen::VectorXcd c = vectors_.transpose().cast<std::complex<double>>() * psi0.amp;
    for (Eigen::Index n = 0; n < c.size(); ++n) c(n) *= std::polar(1.0, -energies_(n) * t);
    return BipartiteState{space_, vectors_.cast<std::complex<double>>() * c};
}

BipartiteState evolve_bipartite(const BipartiteSpace& space, const BipartiteState& psi0, double t, double G,
                                double Omega) {
    return BipartitePropagator(space, G, Omega).evolve(psi0, t);
}

ReducedState reduced_density(const BipartiteState& psi) {
    const Eigen::MatrixXcd a = psi.grid();
    return ReducedState{a * a.adjoint()};
}

MixedEcho mixed_loschmidt(const ReducedState& rho, const SpinState& psi0_single, const BipartiteSpace& space) {
    if (psi0_single.amp.size() != rho.rho.rows()) throw ConfigError("mixed_loschmidt: state size mismatch");
    const std::complex<double> v = psi0_single.amp.dot(rho.rho * psi0_single.amp);
    MixedEcho e;
    e.L = std::clamp(v.real(), 0.0, 1.0);
    e.r = rate_of(e.L, space.n_per_side(), e.underflow);
    return e;
}

SyPovm sy_povm(const BipartiteSpace& space) {
    const Eigen::Index d = space.side_dim();
    const double j = space.j_sub();
    Eigen::MatrixXcd Sy = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        const double v = 0.5 * raise(j, -j + static_cast<double>(i));
        Sy(i + 1, i) = std::complex<double>(0.0, -v);
        Sy(i, i + 1) = std::complex<double>(0.0, v);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Sy);
    SyPovm p;
    p.basis = es.eigenvectors();
    p.eigenvalues = es.eigenvalues();
    // Eigenvalues are -j..j; m = 0 belongs to E_plus.
    p.n_minus = static_cast<Eigen::Index>(j);
    const Eigen::MatrixXcd Vm = p.basis.leftCols(p.n_minus);
    const Eigen::MatrixXcd Vp = p.basis.rightCols(d - p.n_minus);
    p.plus = Vp * Vp.adjoint();
    p.minus = Vm * Vm.adjoint();
    return p;
}

ConditionedEcho conditioned_loschmidt(const BipartiteState& psi, const SpinState& psi0_single,
                                      const BipartiteSpace& space, const SyPovm& povm) {
    if (psi0_single.amp.size() != space.side_dim()) throw ConfigError("conditioned_loschmidt: state size mismatch");
    const Eigen::MatrixXcd a = psi.grid();
    // Columns of w are S-side amplitudes in the S_y eigenbasis.
    const Eigen::MatrixXcd w = povm.basis.adjoint() * a.transpose();
    const Eigen::VectorXcd v = w * psi0_single.amp.conjugate();
    const Eigen::Index nm = povm.n_minus;
    const Eigen::Index np = space.side_dim() - nm;
    ConditionedEcho e;
    e.L_minus = v.head(nm).squaredNorm();
    e.L_plus = v.tail(np).squaredNorm();
    e.L = e.L_plus + e.L_minus;
    const double pm = w.topRows(nm).squaredNorm();
    const double pp = w.bottomRows(np).squaredNorm();
    e.p_plus = pp / (pp + pm);
    e.p_minus = pm / (pp + pm);
    const int n = space.n_per_side();
    e.r = rate_of(e.L, n, e.underflow);
    e.r_plus = rate_of(e.L_plus, n, e.underflow_plus);
    e.r_minus = rate_of(e.L_minus, n, e.underflow_minus);
    return e;
}

ConditionedEcho conditioned_loschmidt(const BipartiteState& psi, const SpinState& psi0_single,
                                      const BipartiteSpace& space) {
    return conditioned_loschmidt(psi, psi0_single, space, sy_povm(space));
}

void BipartiteConfig::validate() const {
    if (!std::isfinite(G) || !std::isfinite(Omega)) throw ConfigError("bipartite: couplings must be finite");
    const BipartiteSpace space(n_per_side);
    const double j = space.j_sub();
    if (std::abs(m0) > j || std::abs(m0 - std::round(m0 + j) + j) > 1e-12)
        throw ConfigError("bipartite: m0 must be an allowed level of spin " + std::to_string(j));
    if (times.empty()) throw ConfigError("bipartite: empty time grid");
    if (times.front() < 0) throw ConfigError("bipartite: negative time");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ConfigError("bipartite: times must be strictly increasing");
    if (workers < 1) throw ConfigError("bipartite: workers must be >= 1");
}

std::vector<ConditionedEcho> bipartite_rates(const BipartiteConfig& cfg) {
    cfg.validate();
    const BipartiteSpace space(cfg.n_per_side);
    const BipartitePropagator prop(space, cfg.G, cfg.Omega);
    const SyPovm povm = sy_povm(space);
    const SpinState psi0 = SpinState::fock(space.side(), cfg.m0);
    const BipartiteState start = BipartiteState::product(psi0, psi0);
    std::vector<ConditionedEcho> out(cfg.times.size());
    parallel_for(cfg.times.size(), cfg.workers, [&](std::size_t k) {
        const double t = cfg.times[k];
        out[k] = conditioned_loschmidt(prop.evolve(start, t), psi0, space, povm);
        out[k].t = t;
    });
    return out;
}

}  // namespace darkband
