#pragma once

#include <Eigen/Dense>

namespace darkband {

// Real symmetric tridiagonal matrix; off(i) couples rows i and i+1.
struct Tridiagonal {
    Eigen::VectorXd diag;
    Eigen::VectorXd off;

    Eigen::Index size() const { return diag.size(); }
    Eigen::MatrixXd dense() const;
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    double norm_inf() const;
};

// Ascending energies; column n of vectors is the eigenvector of energies(n).
struct EigenSystem {
    Eigen::VectorXd energies;
    Eigen::MatrixXd vectors;

    Eigen::Index size() const { return energies.size(); }
};

// Implicit-shift QL with eigenvector accumulation. Each eigenvector is signed
// so that its largest-magnitude component is positive.
EigenSystem diagonalize(const Tridiagonal& h, int max_iter_per_value = 30);

}  // namespace darkband
