#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "darkband/dicke.hpp"

namespace darkband {

// Two spin-N/2 subsystems I and S; tensor index is (m_I slow, m_S fast).
class BipartiteSpace {
public:
    explicit BipartiteSpace(int n_per_side);

    int n_per_side() const noexcept { return n_; }
    double j_sub() const noexcept { return 0.5 * n_; }
    Eigen::Index side_dim() const noexcept { return n_ + 1; }
    Eigen::Index dim() const noexcept { return side_dim() * side_dim(); }
    DickeSpace side() const { return DickeSpace(n_); }
    Eigen::Index index(Eigen::Index i_I, Eigen::Index i_S) const noexcept { return i_I * side_dim() + i_S; }

private:
    int n_;
};

// Dense propagation budget.
inline constexpr Eigen::Index kMaxBipartiteDim = 2500;

struct BipartiteState {
    BipartiteSpace space;
    Eigen::VectorXcd amp;

    static BipartiteState product(const SpinState& a, const SpinState& b);
    // Rows m_I, columns m_S.
    Eigen::MatrixXcd grid() const;
};

struct ReducedState {
    Eigen::MatrixXcd rho;

    double trace() const { return rho.trace().real(); }
    double purity() const { return (rho * rho).trace().real(); }
};

Eigen::SparseMatrix<double> build_bipartite_hamiltonian(const BipartiteSpace& space, double G, double Omega);

class BipartitePropagator {
public:
    BipartitePropagator(const BipartiteSpace& space, double G, double Omega);

    const BipartiteSpace& space() const noexcept { return space_; }
    const Eigen::VectorXd& energies() const noexcept { return energies_; }
    BipartiteState evolve(const BipartiteState& psi0, double t) const;

private:
    BipartiteSpace space_;
    Eigen::VectorXd energies_;
    Eigen::MatrixXd vectors_;
};

BipartiteState evolve_bipartite(const BipartiteSpace& space, const BipartiteState& psi0, double t, double G,
                                double Omega);

ReducedState reduced_density(const BipartiteState& psi);

struct MixedEcho {
    double L = 0.0;
    double r = 0.0;
    bool underflow = false;
};

// r is per subsystem atom number N.
MixedEcho mixed_loschmidt(const ReducedState& rho, const SpinState& psi0_single, const BipartiteSpace& space);

// Projectors on the S side; the full POVM elements are 1_I (x) plus and 1_I (x) minus.
struct SyPovm {
    Eigen::MatrixXcd plus;
    Eigen::MatrixXcd minus;
    // S_y eigenvectors in columns, eigenvalues ascending.
    Eigen::MatrixXcd basis;
    Eigen::VectorXd eigenvalues;
    Eigen::Index n_minus = 0;
};

SyPovm sy_povm(const BipartiteSpace& space);

struct ConditionedEcho {
    double t = 0.0;
    double L = 0.0;
    double L_plus = 0.0;
    double L_minus = 0.0;
    double p_plus = 0.0;
    double p_minus = 0.0;
    double r = 0.0;
    double r_plus = 0.0;
    double r_minus = 0.0;
    bool underflow = false;
    bool underflow_plus = false;
    bool underflow_minus = false;
};

ConditionedEcho conditioned_loschmidt(const BipartiteState& psi, const SpinState& psi0_single,
                                      const BipartiteSpace& space, const SyPovm& povm);
ConditionedEcho conditioned_loschmidt(const BipartiteState& psi, const SpinState& psi0_single,
                                      const BipartiteSpace& space);

struct BipartiteConfig {
    double G = 1.0;
    double Omega = 1.0;
    int n_per_side = 20;
    // Fock level of each subsystem; nearest allowed m to 0.6 j_sub by default.
    double m0 = 6.0;
    std::vector<double> times;
    int workers = 1;

    void validate() const;
};

std::vector<ConditionedEcho> bipartite_rates(const BipartiteConfig& cfg);

}  // namespace darkband
