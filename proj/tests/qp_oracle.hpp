#pragma once

// Brute-force reference for small least-squares QPs, shared by the unit and
// acceptance tests.

#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "evermap/qp.hpp"

namespace qp_oracle {

using evermap::QpProblem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937& rng) {
    std::normal_distribution<double> g;
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

inline VectorXd random_vector(Eigen::Index n, std::mt19937& rng) {
    std::normal_distribution<double> g;
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

// Tries every subset of inequalities as the active set, solves the resulting
// equality-constrained least squares through its KKT system, and keeps the
// best primal feasible point.
inline double enumerate_optimum(const QpProblem& p) {
    const auto n = p.unknowns();
    const auto m = p.ineq_matrix.rows();
    const auto me = p.eq_matrix.rows();
    const MatrixXd g = p.lsq_matrix.transpose() * p.lsq_matrix;
    const VectorXd c = p.lsq_matrix.transpose() * p.lsq_rhs;
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < m; ++i)
            if (mask & (1u << i)) rows.push_back(i);
        const auto k = static_cast<Eigen::Index>(rows.size()) + me;
        MatrixXd kkt = MatrixXd::Zero(n + k, n + k);
        VectorXd rhs(n + k);
        kkt.topLeftCorner(n, n) = g;
        rhs.head(n) = c;
        for (Eigen::Index r = 0; r < me; ++r) {
            kkt.block(n + r, 0, 1, n) = p.eq_matrix.row(r);
            kkt.block(0, n + r, n, 1) = p.eq_matrix.row(r).transpose();
            rhs(n + r) = p.eq_rhs(r);
        }
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto at = n + me + static_cast<Eigen::Index>(r);
            kkt.block(at, 0, 1, n) = p.ineq_matrix.row(rows[r]);
            kkt.block(0, at, n, 1) = p.ineq_matrix.row(rows[r]).transpose();
            rhs(at) = p.ineq_rhs(rows[r]);
        }
        Eigen::FullPivLU<MatrixXd> lu(kkt);
        if (!lu.isInvertible()) continue;
        const VectorXd x = lu.solve(rhs).head(n);
        if (m && (p.ineq_matrix * x - p.ineq_rhs).maxCoeff() > 1e-9) continue;
        best = std::min(best, 0.5 * (p.lsq_matrix * x - p.lsq_rhs).squaredNorm());
    }
    return best;
}

inline QpProblem random_problem(std::mt19937& rng, Eigen::Index n, Eigen::Index m_in, Eigen::Index m_eq) {
    QpProblem p = QpProblem::least_squares(random_matrix(n + 4, n, rng), random_vector(n + 4, rng));
    p.ineq_matrix = random_matrix(m_in, n, rng);
    // Offsets keep the origin strictly feasible so the problem is never empty.
    p.ineq_rhs = random_vector(m_in, rng).cwiseAbs() * 0.3;
    p.eq_matrix = random_matrix(m_eq, n, rng);
    p.eq_rhs = VectorXd::Zero(m_eq);
    return p;
}

}  // namespace qp_oracle
