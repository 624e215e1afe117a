#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "darkband/dicke.hpp"
#include "darkband/errors.hpp"
#include "doctest.h"

using namespace darkband;
using cd = std::complex<double>;

namespace {

Eigen::VectorXcd expm_state(const DickeSpace& sp, double G, double Om, double m0, double t) {
    const Eigen::MatrixXcd H = build_hamiltonian(sp, G, Om).dense().cast<cd>();
    const Eigen::MatrixXcd U = (cd(0, -t) * H).exp();
    return U * SpinState::fock(sp, m0).amp;
}

QuenchConfig cfg_for(int two_j, double m0, std::vector<double> times) {
    QuenchConfig c;
    c.space = DickeSpace(two_j);
    c.m0 = m0;
    c.times = std::move(times);
    return c;
}

}  // namespace

TEST_CASE("hamiltonian entries") {
    const auto h = build_hamiltonian(DickeSpace(1), 1.0, 1.0);
    CHECK(h.diag(0) == doctest::Approx(0.25));
    CHECK(h.diag(1) == doctest::Approx(0.25));
    CHECK(h.off(0) == doctest::Approx(0.5));

    const auto h10 = build_hamiltonian(DickeSpace(20), 0.7, 1.3);
    for (Eigen::Index i = 0; i < 21; ++i) {
        const double m = -10.0 + i;
        CHECK(h10.diag(i) == doctest::Approx(0.7 / 20.0 * m * m));
        if (i < 20) CHECK(h10.off(i) == doctest::Approx(0.65 * std::sqrt(110.0 - m * (m + 1))));
    }
}

TEST_CASE("spectra with closed forms") {
    const auto es1 = diagonalize(build_hamiltonian(DickeSpace(2), 1.7, 0.0));
    CHECK(es1.energies(0) == doctest::Approx(0.0));
    CHECK(es1.energies(1) == doctest::Approx(0.85));
    CHECK(es1.energies(2) == doctest::Approx(0.85));

    const auto es = diagonalize(build_hamiltonian(DickeSpace(1), 1.0, 1.0));
    CHECK(es.energies(0) == doctest::Approx(-0.25));
    CHECK(es.energies(1) == doctest::Approx(0.75));

    Tridiagonal one{Eigen::VectorXd::Constant(1, 3.5), Eigen::VectorXd(0)};
    const auto e1 = diagonalize(one);
    CHECK(e1.energies(0) == 3.5);
    CHECK(e1.vectors(0, 0) == 1.0);
}

TEST_CASE("spectral decomposition against dense solver") {
    const DickeSpace sp(80);
    const auto h = build_hamiltonian(sp, 1.0, 1.0);
    const auto es = diagonalize(h);
    const Eigen::MatrixXd H = h.dense();
    const Eigen::MatrixXd rebuilt = es.vectors * es.energies.asDiagonal() * es.vectors.transpose();
    CHECK((rebuilt - H).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::Index n = es.size();
    CHECK((es.vectors.transpose() * es.vectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index k = 0; k < n; ++k) {
        CHECK((H * es.vectors.col(k) - es.energies(k) * es.vectors.col(k)).norm() < 1e-9 * h.norm_inf());
        Eigen::Index big;
        es.vectors.col(k).cwiseAbs().maxCoeff(&big);
        CHECK(es.vectors(big, k) > 0);
        if (k > 0) CHECK(es.energies(k) >= es.energies(k - 1));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(H);
    CHECK((ref.eigenvalues() - es.energies).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("m0 helper") {
    CHECK(default_m0(DickeSpace(160)) == 48.0);
    CHECK(default_m0(DickeSpace(80)) == 24.0);
    CHECK(default_m0(DickeSpace(700)) == 210.0);
    // j = 5/2: 0.6 j = 1.5 is itself allowed.
    CHECK(default_m0(DickeSpace(5)) == 1.5);
    // j = 5: 0.6 j = 3.
    CHECK(default_m0(DickeSpace(10)) == 3.0);
    // j = 5/2, target 1.25: nearest half-odd value is 1.5.
    CHECK(default_m0(DickeSpace(5), 0.5) == 1.5);
    // j = 1, fraction 0.5: target 0.5 ties between 0 and 1, rounds up.
    CHECK(default_m0(DickeSpace(2), 0.5) == 1.0);
}

TEST_CASE("evolution") {
    SUBCASE("Fock state stationary without field") {
        const DickeSpace sp(12);
        const auto es = diagonalize(build_hamiltonian(sp, 1.0, 0.0));
        const auto psi0 = SpinState::fock(sp, 2.0);
        for (double t : {0.3, 4.0, 17.0}) {
            const auto psi = evolve(es, psi0, t);
            CHECK(std::abs(std::abs(psi.amp.dot(psi0.amp)) - 1.0) < 1e-12);
        }
    }
    SUBCASE("t = 0 identity") {
        const DickeSpace sp(9);
        const auto es = diagonalize(build_hamiltonian(sp, 1.0, 1.0));
        const auto psi0 = SpinState::fock(sp, 1.5);
        CHECK(evolve(es, psi0, 0.0).amp == psi0.amp);
    }
    SUBCASE("spin one half") {
        const DickeSpace sp(1);
        const auto es = diagonalize(build_hamiltonian(sp, 1.0, 1.0));
        const auto psi0 = SpinState::fock(sp, 0.5);
        for (double t : {0.0, 0.4, 1.1, 2.9, 6.0}) {
            const double p = std::norm(psi0.amp.dot(evolve(es, psi0, t).amp));
            CHECK(p == doctest::Approx(std::pow(std::cos(t / 2), 2)).epsilon(1e-12));
        }
    }
    SUBCASE("matches matrix exponential") {
        const DickeSpace sp(20);
        const auto es = diagonalize(build_hamiltonian(sp, 1.0, 1.0));
        const auto psi0 = SpinState::fock(sp, 6.0);
        for (double t : {0.5, 2.4, 3.7}) {
            const auto psi = evolve(es, psi0, t);
            CHECK((psi.amp - expm_state(sp, 1.0, 1.0, 6.0, t)).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SUBCASE("dimension mismatch") {
        const auto es = diagonalize(build_hamiltonian(DickeSpace(4), 1.0, 1.0));
        CHECK_THROWS_AS(evolve(es, SpinState::fock(DickeSpace(6), 0.0), 1.0), ConfigError);
    }
}

TEST_CASE("unitarity and energy conservation") {
    const DickeSpace sp(160);
    const auto h = build_hamiltonian(sp, 1.0, 1.0);
    const auto es = diagonalize(h);
    const auto psi0 = SpinState::fock(sp, 48.0);
    const double e0 = 48.0 * 48.0 / 160.0;
    for (int k = 0; k <= 50; ++k) {
        const auto psi = evolve(es, psi0, 0.1 * k);
        CHECK(std::abs(psi.norm() - 1.0) < 1e-10);
        const Eigen::VectorXcd hpsi = h.dense().cast<cd>() * psi.amp;
        CHECK(std::abs(psi.amp.dot(hpsi) - e0) < 1e-10 * h.norm_inf());
    }
}

TEST_CASE("loschmidt and fock map") {
    std::vector<double> times;
    for (int k = 0; k <= 60; ++k) times.push_back(0.1 * k);
    const auto cfg = cfg_for(20, 6.0, times);
    const auto echo = loschmidt(cfg);
    CHECK(echo.front().L == 1.0);
    for (std::size_t k = 0; k < times.size(); ++k) {
        CHECK(echo[k].L >= 0.0);
        CHECK(echo[k].L <= 1.0);
        const auto ref = expm_state(cfg.space, 1.0, 1.0, 6.0, times[k]);
        CHECK(echo[k].L == doctest::Approx(std::norm(ref(cfg.space.index_of(6.0)))).epsilon(1e-9));
    }
    const auto map = fock_map(cfg);
    for (Eigen::Index c = 0; c < map.cols(); ++c) {
        CHECK(std::abs(map.col(c).squaredNorm() - 1.0) < 1e-10);
        CHECK(std::abs(std::pow(map(cfg.space.index_of(6.0), c), 2) - echo[static_cast<std::size_t>(c)].L) < 1e-12);
    }
    CHECK(map(cfg.space.index_of(6.0), 0) == 1.0);
    CHECK(map.col(0).sum() == 1.0);
}

TEST_CASE("parallel evaluation is deterministic") {
    std::vector<double> times;
    for (int k = 0; k <= 40; ++k) times.push_back(0.13 * k);
    auto cfg = cfg_for(60, 18.0, times);
    const auto a = loschmidt(cfg);
    cfg.workers = 4;
    const auto b = loschmidt(cfg);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].L == b[k].L);
}

TEST_CASE("rate function") {
    const DickeSpace sp(20);
    std::vector<EchoSample> echo{{0.0, 1.0, false}, {1.0, std::exp(-10.0), false}, {2.0, 0.0, true}};
    const auto rj = rate_function(echo, sp, RateNorm::PerJ);
    CHECK(rj[0].r == 0.0);
    CHECK(rj[1].r == doctest::Approx(1.0));
    CHECK(rj[2].underflow);
    const auto rn = rate_function(echo, sp, RateNorm::PerN);
    CHECK(rn[1].r == doctest::Approx(0.5));
}

TEST_CASE("invalid configurations") {
    CHECK_THROWS_AS(DickeSpace(-1), ConfigError);
    CHECK_THROWS_AS(DickeSpace::from_j(1.3), ConfigError);
    CHECK_THROWS_AS(loschmidt(cfg_for(10, 0.5, {0.0, 1.0})), ConfigError);
    CHECK_THROWS_AS(loschmidt(cfg_for(10, 6.0, {0.0, 1.0})), ConfigError);
    CHECK_THROWS_AS(loschmidt(cfg_for(10, 1.0, {1.0, 0.5})), ConfigError);
}
