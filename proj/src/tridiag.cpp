#include "darkband/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "darkband/errors.hpp"

namespace darkband {

Eigen::MatrixXd Tridiagonal::dense() const {
    const Eigen::Index n = size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diag(i);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        m(i, i + 1) = off(i);
        m(i + 1, i) = off(i);
    }
    return m;
}

Eigen::VectorXd Tridiagonal::apply(const Eigen::VectorXd& v) const {
    const Eigen::Index n = size();
    Eigen::VectorXd out = diag.cwiseProduct(v);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        out(i) += off(i) * v(i + 1);
        out(i + 1) += off(i) * v(i);
    }
    return out;
}

double Tridiagonal::norm_inf() const {
    double best = 0.0;
    const Eigen::Index n = size();
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = std::abs(diag(i));
        if (i > 0) row += std::abs(off(i - 1));
        if (i + 1 < n) row += std::abs(off(i));
        best = std::max(best, row);
    }
    return best;
}

EigenSystem diagonalize(const Tridiagonal& h, int max_iter_per_value) {
    const Eigen::Index n = h.size();
    if (n == 0) throw ConfigError("diagonalize: empty matrix");
    if (h.off.size() != std::max<Eigen::Index>(n - 1, 0))
        throw ConfigError("diagonalize: off-diagonal length must be size-1");

    Eigen::VectorXd d = h.diag;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) e(i) = h.off(i);
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(n, n);

    const double eps = std::numeric_limits<double>::epsilon();
    double f = 0.0;
    double tst1 = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d(l)) + std::abs(e(l)));
        Eigen::Index m = l;
        while (m < n - 1 && std::abs(e(m)) > eps * tst1) ++m;

        if (m > l) {
            int iter = 0;
            do {
                if (++iter > max_iter_per_value)
                    throw ConvergenceError("diagonalize: QL iteration budget exhausted",
                                           static_cast<std::size_t>(n), std::abs(e(l)));
                double g = d(l);
                double p = (d(l + 1) - g) / (2.0 * e(l));
                double r = std::hypot(p, 1.0);
                if (p < 0) r = -r;
                d(l) = e(l) / (p + r);
                d(l + 1) = e(l) * (p + r);
                const double dl1 = d(l + 1);
                double hh = g - d(l);
                for (Eigen::Index i = l + 2; i < n; ++i) d(i) -= hh;
                f += hh;

                // Implicit QL sweep from m back to l.
                p = d(m);
                double c = 1.0, c2 = 1.0, c3 = 1.0;
                const double el1 = e(l + 1);
                double s = 0.0, s2 = 0.0;
                for (Eigen::Index i = m - 1; i >= l; --i) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e(i);
                    hh = c * p;
                    r = std::hypot(p, e(i));
                    e(i + 1) = s * r;
                    s = e(i) / r;
                    c = p / r;
                    p = c * d(i) - s * g;
                    d(i + 1) = hh + s * (c * g + s * d(i));
                    for (Eigen::Index k = 0; k < n; ++k) {
                        const double zk = z(k, i + 1);
                        z(k, i + 1) = s * z(k, i) + c * zk;
                        z(k, i) = c * z(k, i) - s * zk;
                    }
                }
                p = -s * s2 * c3 * el1 * e(l) / dl1;
                e(l) = s * p;
                d(l) = c * p;
            } while (std::abs(e(l)) > eps * tst1);
        }
        d(l) += f;
        e(l) = 0.0;
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return d(a) < d(b); });

    EigenSystem out;
    out.energies.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index col = 0; col < n; ++col) {
        const Eigen::Index src = order[static_cast<std::size_t>(col)];
        out.energies(col) = d(src);
        Eigen::Index big = 0;
        z.col(src).cwiseAbs().maxCoeff(&big);
        const double sign = z(big, src) < 0 ? -1.0 : 1.0;
        out.vectors.col(col) = sign * z.col(src);
    }
    return out;
}

}  // namespace darkband
