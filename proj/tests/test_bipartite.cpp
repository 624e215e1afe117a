#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "darkband/bipartite.hpp"
#include "darkband/complexmech.hpp"
#include "darkband/errors.hpp"
#include "doctest.h"

using namespace darkband;
using cd = std::complex<double>;

namespace {

// Single-spin operators built from ladder matrices, independent of the library.
Eigen::MatrixXcd jplus(double j) {
    const int d = static_cast<int>(std::lround(2 * j)) + 1;
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 0; i + 1 < d; ++i) {
        const double m = -j + i;
        p(i + 1, i) = std::sqrt(j * (j + 1) - m * (m + 1));
    }
    return p;
}

Eigen::MatrixXcd jz(double j) {
    const int d = static_cast<int>(std::lround(2 * j)) + 1;
    Eigen::VectorXcd v(d);
    for (int i = 0; i < d; ++i) v(i) = -j + i;
    return v.asDiagonal();
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index l = 0; l < a.cols(); ++l) k.block(i * b.rows(), l * b.cols(), b.rows(), b.cols()) = a(i, l) * b;
    return k;
}

Eigen::MatrixXcd dense_hamiltonian(int n, double G, double Omega) {
    const double j = 0.5 * n;
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n + 1, n + 1);
    const Eigen::MatrixXcd P = jplus(j);
    const Eigen::MatrixXcd X = 0.5 * (P + P.adjoint());
    const Eigen::MatrixXcd Z = kron(jz(j), I) + kron(I, jz(j));
    return G / (2.0 * n) * Z * Z + Omega * (kron(X, I) + kron(I, X));
}

std::vector<double> grid(double a, double b, double h) {
    std::vector<double> g;
    for (int i = 0; a + i * h <= b + 1e-12; ++i) g.push_back(a + i * h);
    return g;
}

}  // namespace

TEST_CASE("bipartite space") {
    const BipartiteSpace s(20);
    CHECK(s.dim() == 441);
    CHECK(s.j_sub() == 10.0);
    CHECK(s.index(1, 0) == 21);
    CHECK_THROWS_AS(BipartiteSpace(3), ConfigError);
    CHECK_THROWS_AS(BipartiteSpace(0), ConfigError);
}

TEST_CASE("bipartite hamiltonian") {
    SUBCASE("two spin-1/2 subsystems") {
        const BipartiteSpace s(2);
        const Eigen::MatrixXd H = Eigen::MatrixXd(build_bipartite_hamiltonian(s, 1.0, 0.0));
        CHECK(H.rows() == 9);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        int n0 = 0, nq = 0, n1 = 0;
        for (double e : es.eigenvalues()) {
            if (std::abs(e) < 1e-14) ++n0;
            if (std::abs(e - 0.25) < 1e-14) ++nq;
            if (std::abs(e - 1.0) < 1e-14) ++n1;
        }
        CHECK(n0 == 3);
        CHECK(nq == 4);
        CHECK(n1 == 2);
    }
    SUBCASE("exact symmetry and Kronecker oracle") {
        const BipartiteSpace s(6);
        const Eigen::MatrixXd H = Eigen::MatrixXd(build_bipartite_hamiltonian(s, 1.3, 0.7));
        CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((H.cast<cd>() - dense_hamiltonian(6, 1.3, 0.7)).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("spectrum is the union of total-spin sectors") {
        const int n = 8;
        const BipartiteSpace s(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(build_bipartite_hamiltonian(s, 1.0, 1.0)));
        std::vector<double> want;
        for (int J = 0; J <= n; ++J) {
            // Sector J carries (G/2N) Jz^2 = (G J/N)/(2J) Jz^2.
            if (J == 0) {
                want.push_back(0.0);
                continue;
            }
            const auto t = build_hamiltonian(DickeSpace(2 * J), static_cast<double>(J) / n, 1.0);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sec(t.dense());
            for (double e : sec.eigenvalues()) want.push_back(e);
        }
        std::sort(want.begin(), want.end());
        REQUIRE(static_cast<Eigen::Index>(want.size()) == s.dim());
        for (Eigen::Index i = 0; i < s.dim(); ++i) CHECK(std::abs(es.eigenvalues()(i) - want[i]) < 1e-11);
    }
    SUBCASE("ground energy matches the collective spin of the same size") {
        for (int n : {10, 20}) {
            const BipartitePropagator p(BipartiteSpace(n), 1.0, 1.0);
            const auto single = diagonalize(build_hamiltonian(DickeSpace(2 * n), 1.0, 1.0));
            CHECK(std::abs(p.energies()(0) - single.energies(0)) < 1e-10);
        }
    }
}

TEST_CASE("bipartite evolution") {
    const BipartiteSpace s(4);
    const SpinState f = SpinState::fock(s.side(), 1);
    const BipartiteState psi0 = BipartiteState::product(f, f);
    const BipartitePropagator p(s, 1.0, 1.0);
    CHECK((p.evolve(psi0, 0.0).amp - psi0.amp).norm() < 1e-13);
    const Eigen::MatrixXcd U = (cd(0, -1.7) * dense_hamiltonian(4, 1.0, 1.0)).exp();
    CHECK((p.evolve(psi0, 1.7).amp - U * psi0.amp).norm() < 1e-11);

    const BipartitePropagator still(s, 1.0, 0.0);
    const auto moved = still.evolve(psi0, 2.3);
    CHECK(std::abs(std::abs(moved.amp.dot(psi0.amp)) - 1.0) < 1e-13);

    const BipartiteSpace s20(20);
    const SpinState f6 = SpinState::fock(s20.side(), 6);
    const BipartiteState start = BipartiteState::product(f6, f6);
    const BipartitePropagator p20(s20, 1.0, 1.0);
    const Eigen::SparseMatrix<double> H = build_bipartite_hamiltonian(s20, 1.0, 1.0);
    const double e0 = start.amp.dot(H.cast<cd>() * start.amp).real();
    for (double t : {0.5, 2.0, 5.0}) {
        const auto psi = p20.evolve(start, t);
        CHECK(std::abs(psi.amp.norm() - 1.0) < 1e-10);
        CHECK(std::abs(psi.amp.dot(H.cast<cd>() * psi.amp).real() - e0) < 1e-9);
    }
    CHECK(std::abs(evolve_bipartite(s, psi0, 1.7, 1.0, 1.0).amp.dot(U * psi0.amp) - 1.0) < 1e-11);
    CHECK_THROWS_AS(BipartitePropagator(BipartiteSpace(50), 1.0, 1.0), ResourceError);
}

TEST_CASE("reduced density") {
    const BipartiteSpace s(6);
    const SpinState a = SpinState::fock(s.side(), 2);
    const auto rho = reduced_density(BipartiteState::product(a, a));
    CHECK(std::abs(rho.trace() - 1.0) < 1e-14);
    CHECK(std::abs(rho.purity() - 1.0) < 1e-14);
    CHECK(std::abs(rho.rho(5, 5) - 1.0) < 1e-14);

    BipartiteState bell{s, Eigen::VectorXcd::Zero(s.dim())};
    for (Eigen::Index i = 0; i < s.side_dim(); ++i) bell.amp(s.index(i, i)) = 1.0 / std::sqrt(7.0);
    const auto mixed = reduced_density(bell);
    CHECK((mixed.rho - Eigen::MatrixXcd::Identity(7, 7) / 7.0).norm() < 1e-14);

    const BipartitePropagator p(s, 1.0, 1.0);
    const auto psi = p.evolve(BipartiteState::product(a, a), 2.0);
    const auto r = reduced_density(psi);
    CHECK((r.rho - r.rho.adjoint()).norm() < 1e-14);
    CHECK(std::abs(r.trace() - 1.0) < 1e-12);
    CHECK(r.purity() < 1.0 - 1e-3);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r.rho);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("mixed Loschmidt echo") {
    const BipartiteSpace s(10);
    const SpinState f = SpinState::fock(s.side(), 3);
    const BipartiteState start = BipartiteState::product(f, f);
    const BipartitePropagator p(s, 1.0, 1.0);
    const auto e0 = mixed_loschmidt(reduced_density(start), f, s);
    CHECK(e0.L == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(e0.r) < 1e-14);
    for (double t : {1.0, 2.5, 3.5}) {
        const auto psi = p.evolve(start, t);
        const auto e = mixed_loschmidt(reduced_density(psi), f, s);
        const double full = std::norm(start.amp.dot(psi.amp));
        CHECK(e.L >= full);
        CHECK(e.L <= 1.0);
        CHECK(e.r == doctest::Approx(-std::log(e.L) / 10.0).epsilon(1e-12));
        CHECK(e.L == doctest::Approx(conditioned_loschmidt(psi, f, s).L).epsilon(1e-12));
    }
}

TEST_CASE("S_y POVM") {
    for (int n : {2, 6, 20}) {
        const BipartiteSpace s(n);
        const auto povm = sy_povm(s);
        const Eigen::Index d = s.side_dim();
        const Eigen::MatrixXcd Id = Eigen::MatrixXcd::Identity(d, d);
        CHECK((povm.plus + povm.minus - Id).norm() < 1e-13);
        CHECK((povm.plus * povm.plus - povm.plus).norm() < 1e-13);
        CHECK((povm.minus * povm.minus - povm.minus).norm() < 1e-13);
        CHECK(std::abs(povm.plus.trace().real() - (n / 2 + 1)) < 1e-12);
        // Oracle: rotate the S_z >= 0 projector by exp(-i pi/2 S_x) (S_z -> S_y).
        const double j = 0.5 * n;
        const Eigen::MatrixXcd P = jplus(j);
        const Eigen::MatrixXcd X = 0.5 * (P + P.adjoint());
        const Eigen::MatrixXcd R = (cd(0, -std::numbers::pi / 2) * X).exp();
        Eigen::MatrixXcd zplus = Eigen::MatrixXcd::Zero(d, d);
        for (Eigen::Index i = n / 2; i < d; ++i) zplus(i, i) = 1.0;
        const Eigen::MatrixXcd Y = (P - P.adjoint()) / cd(0, 2);
        const Eigen::MatrixXcd Yrot = R.adjoint() * jz(j) * R;
        REQUIRE((Yrot - Y).norm() < 1e-12);
        CHECK((R.adjoint() * zplus * R - povm.plus).norm() < 1e-11);
    }
}

TEST_CASE("conditioned echo") {
    const BipartiteSpace s(20);
    const SpinState f = SpinState::fock(s.side(), 6);
    const BipartiteState start = BipartiteState::product(f, f);
    const auto at0 = conditioned_loschmidt(start, f, s);
    CHECK(std::abs(at0.L_plus + at0.L_minus - 1.0) < 1e-12);
    CHECK(std::abs(at0.p_plus + at0.p_minus - 1.0) < 1e-12);

    BipartiteConfig cfg;
    cfg.times = grid(0.0, 4.5, 0.01);
    cfg.workers = 2;
    const auto rows = bipartite_rates(cfg);
    for (const auto& e : rows) {
        CHECK(std::abs(e.L_plus + e.L_minus - e.L) < 1e-12);
        CHECK(std::abs(e.p_plus + e.p_minus - 1.0) < 1e-12);
        const double lo = std::min(e.r_plus, e.r_minus);
        CHECK(e.r <= lo + 1e-12);
        CHECK(e.r >= lo - std::log(2.0) / 20.0 - 1e-12);
    }

    const auto rc = asymptotic_rate(grid(3.0, 4.0, 0.05), 0.6, 1, 1);
    REQUIRE(rc.kink_t);
    const double t1 = locate_caustic(ActionBranch::first(0.6), 0.6, 1, 1).t;
    const double t2 = locate_caustic(ActionBranch::second(0.6), 0.6, 1, 1).t;
    std::vector<double> crossings;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double a = rows[i - 1].r_plus - rows[i - 1].r_minus;
        const double b = rows[i].r_plus - rows[i].r_minus;
        if (rows[i].t > t1 && rows[i].t < t2 && a * b <= 0) crossings.push_back(rows[i].t);
    }
    REQUIRE(crossings.size() == 1);
    CHECK(std::abs(crossings[0] - *rc.kink_t) < 0.15 * *rc.kink_t);
    // The minus outcome dominates before the crossing, the plus outcome after it.
    for (const auto& e : rows) {
        if (e.t > t1 && e.t < crossings[0] - 0.05) CHECK(e.r_minus < e.r_plus);
        if (e.t > crossings[0] + 0.05 && e.t < t2) CHECK(e.r_plus < e.r_minus);
    }
}

TEST_CASE("sharkfin kink sharpens with subsystem size") {
    double prev = 0;
    for (int n : {10, 20, 40}) {
        BipartiteConfig cfg;
        cfg.n_per_side = n;
        cfg.m0 = default_m0(DickeSpace(n));
        cfg.times = grid(2.8, 4.0, 0.01);
        const auto rows = bipartite_rates(cfg);
        double curv = 0;
        for (std::size_t i = 1; i + 1 < rows.size(); ++i)
            curv = std::max(curv, std::abs(rows[i + 1].r - 2 * rows[i].r + rows[i - 1].r) / 1e-4);
        CHECK(curv > prev);
        prev = curv;
    }
}

TEST_CASE("bipartite configuration errors") {
    BipartiteConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.times = {0.0, 1.0};
    CHECK_NOTHROW(cfg.validate());
    cfg.m0 = 6.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.m0 = 11;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.m0 = 6;
    cfg.times = {1.0, 0.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.times = {0.0};
    cfg.n_per_side = 7;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
