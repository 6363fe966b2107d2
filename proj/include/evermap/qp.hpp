#pragma once

/**
 * @file qp.hpp
 * @brief Dense convex QP for linearly constrained linear least squares.
 *
 *   minimize   1/2 ||C x - d||^2
 *   subject to A x <= b,  A_eq x = b_eq,  l <= x <= u
 *
 * Solved with a dual active-set method (Goldfarb-Idnani) on the regularized
 * normal matrix C^T C + eps I. The method starts from the unconstrained
 * minimizer and adds violated constraints one at a time, so no feasible
 * starting point is needed and infeasibility is detected directly.
 */

#include <cstddef>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace evermap {

struct QpProblem {
    Eigen::MatrixXd lsq_matrix;   ///< C
    Eigen::VectorXd lsq_rhs;      ///< d
    Eigen::MatrixXd ineq_matrix;  ///< A (rows may be zero)
    Eigen::VectorXd ineq_rhs;     ///< b
    Eigen::MatrixXd eq_matrix;    ///< A_eq (rows may be zero)
    Eigen::VectorXd eq_rhs;       ///< b_eq
    std::optional<Eigen::VectorXd> lower;  ///< l, folded into inequality rows when present
    std::optional<Eigen::VectorXd> upper;  ///< u, folded into inequality rows when present

    /// Problem with `unknowns` columns and empty constraint systems.
    static QpProblem least_squares(Eigen::MatrixXd c, Eigen::VectorXd d);

    [[nodiscard]] Eigen::Index unknowns() const noexcept { return lsq_matrix.cols(); }

    /// Throws InvalidConfiguration on inconsistent dimensions or non-finite entries.
    void validate() const;
};

enum class QpStatus { optimal, infeasible, max_iterations };

std::string_view to_string(QpStatus status) noexcept;

struct QpOptions {
    double tolerance = 1e-8;
    /// 0 selects 10 * (unknowns + constraint rows).
    std::size_t max_iterations = 0;
    double regularization = 1e-10;
};

struct QpSolution {
    Eigen::VectorXd x;
    /// lambda >= 0: one per row of A, followed by upper-bound then lower-bound rows when bounds are set.
    Eigen::VectorXd ineq_multipliers;
    Eigen::VectorXd eq_multipliers;    ///< nu, one per row of A_eq
    double objective = 0.0;            ///< 1/2 ||C x - d||^2
    double kkt_residual = 0.0;         ///< ||C^T(Cx-d) + A^T lambda + A_eq^T nu||_2
    double constraint_violation = 0.0; ///< max(max(Ax-b)_+, ||A_eq x - b_eq||_inf, bound violation)
    std::size_t iterations = 0;
    std::size_t active_inequalities = 0;
    QpStatus status = QpStatus::optimal;
};

QpSolution solve_qp(const QpProblem& problem, const QpOptions& options = {});

/// 1/2 ||C x - d||^2.
double lsq_objective(const QpProblem& problem, const Eigen::VectorXd& x);

}  // namespace evermap
