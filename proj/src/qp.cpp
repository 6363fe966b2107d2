#include "evermap/qp.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "evermap/errors.hpp"

namespace evermap {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative size below which a new constraint normal is treated as lying in the span
// of the active normals.
constexpr double kDependence = 1e-12;
// Relative pivot threshold used to drop linearly dependent equality rows.
constexpr double kEqualityRank = 1e-10;

/// Factorization state of the dual active-set method: J^T N = [R; 0] for the
/// matrix N of active constraint normals, with J = L^{-T} initially.
class ActiveSetFactor {
public:
    explicit ActiveSetFactor(MatrixXd j) : n_(j.rows()), j_(std::move(j)), r_(MatrixXd::Zero(n_, n_)) {}

    [[nodiscard]] Index size() const noexcept { return q_; }

    /// Primal direction z and dual direction r for a candidate normal.
    void directions(const VectorXd& normal, VectorXd& d, VectorXd& z, VectorXd& r) const {
        d.noalias() = j_.transpose() * normal;
        z.noalias() = j_.rightCols(n_ - q_) * d.tail(n_ - q_);
        r = r_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
    }

    /// Appends a normal given d = J^T n. Returns false when n is (numerically) dependent.
    bool add(VectorXd d) {
        if (q_ >= n_) return false;
        for (Index k = n_ - 1; k > q_; --k) {
            const double a = d(k - 1);
            const double b = d(k);
            const double h = std::hypot(a, b);
            if (h == 0.0) continue;
            const double c = a / h;
            const double s = b / h;
            d(k - 1) = h;
            d(k) = 0.0;
            rotate_columns(k - 1, k, c, s);
        }
        const double diag = std::abs(d(q_));
        if (diag <= kDependence * std::max(r_norm_, d.head(q_ + 1).norm())) return false;
        r_.col(q_).head(q_ + 1) = d.head(q_ + 1);
        r_norm_ = std::max(r_norm_, diag);
        ++q_;
        return true;
    }

    /// Removes active column `pos` and restores triangularity with Givens rotations.
    void remove(Index pos) {
        for (Index c = pos; c + 1 < q_; ++c) r_.col(c).head(q_) = r_.col(c + 1).head(q_);
        r_.col(q_ - 1).setZero();
        --q_;
        for (Index k = pos; k < q_; ++k) {
            const double a = r_(k, k);
            const double b = r_(k + 1, k);
            const double h = std::hypot(a, b);
            if (h == 0.0) continue;
            const double c = a / h;
            const double s = b / h;
            for (Index col = k; col < q_; ++col) {
                const double top = r_(k, col);
                const double bottom = r_(k + 1, col);
                r_(k, col) = c * top + s * bottom;
                r_(k + 1, col) = -s * top + c * bottom;
            }
            r_(k + 1, k) = 0.0;
            rotate_columns(k, k + 1, c, s);
        }
    }

private:
    void rotate_columns(Index a, Index b, double c, double s) {
        for (Index row = 0; row < n_; ++row) {
            const double ja = j_(row, a);
            const double jb = j_(row, b);
            j_(row, a) = c * ja + s * jb;
            j_(row, b) = -s * ja + c * jb;
        }
    }

    Index n_;
    MatrixXd j_;
    MatrixXd r_;
    Index q_ = 0;
    double r_norm_ = 1.0;
};

struct Active {
    bool equality;
    Index row;  // row index into the scaled system
};

// Rows scaled to unit Euclidean norm; `norms` keeps the factors to map multipliers back.
struct ScaledRows {
    MatrixXd rows;
    VectorXd rhs;
    VectorXd norms;
};

ScaledRows scale_rows(const MatrixXd& a, const VectorXd& b) {
    ScaledRows out{a, b, VectorXd::Ones(a.rows())};
    for (Index i = 0; i < a.rows(); ++i) {
        const double norm = a.row(i).norm();
        if (norm > 0.0) {
            out.rows.row(i) /= norm;
            out.rhs(i) /= norm;
            out.norms(i) = norm;
        }
    }
    return out;
}

std::vector<Index> independent_rows(const MatrixXd& a) {
    std::vector<Index> keep;
    if (a.rows() == 0) return keep;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(a.transpose());
    qr.setThreshold(kEqualityRank);
    const auto& perm = qr.colsPermutation().indices();
    for (Index k = 0; k < qr.rank(); ++k) keep.push_back(perm(k));
    std::sort(keep.begin(), keep.end());
    return keep;
}

}  // namespace

QpProblem QpProblem::least_squares(MatrixXd c, VectorXd d) {
    QpProblem p;
    const Index n = c.cols();
    p.lsq_matrix = std::move(c);
    p.lsq_rhs = std::move(d);
    p.ineq_matrix = MatrixXd::Zero(0, n);
    p.ineq_rhs = VectorXd::Zero(0);
    p.eq_matrix = MatrixXd::Zero(0, n);
    p.eq_rhs = VectorXd::Zero(0);
    return p;
}

void QpProblem::validate() const {
    const Index n = lsq_matrix.cols();
    auto fail = [](const std::string& what) { throw InvalidConfiguration("malformed QP: " + what); };
    if (n == 0) fail("no unknowns");
    if (lsq_rhs.size() != lsq_matrix.rows()) fail("lsq rhs length differs from row count");
    if (ineq_matrix.cols() != n && ineq_matrix.rows() != 0) fail("inequality column count");
    if (ineq_rhs.size() != ineq_matrix.rows()) fail("inequality rhs length");
    if (eq_matrix.cols() != n && eq_matrix.rows() != 0) fail("equality column count");
    if (eq_rhs.size() != eq_matrix.rows()) fail("equality rhs length");
    if (lower && lower->size() != n) fail("lower bound length");
    if (upper && upper->size() != n) fail("upper bound length");
    if (!lsq_matrix.allFinite() || !lsq_rhs.allFinite() || !ineq_matrix.allFinite() ||
        !ineq_rhs.allFinite() || !eq_matrix.allFinite() || !eq_rhs.allFinite()) {
        fail("non-finite entries");
    }
}

std::string_view to_string(QpStatus status) noexcept {
    switch (status) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::infeasible: return "infeasible";
        case QpStatus::max_iterations: return "max_iterations";
    }
    return "unknown";
}

double lsq_objective(const QpProblem& problem, const VectorXd& x) {
    return 0.5 * (problem.lsq_matrix * x - problem.lsq_rhs).squaredNorm();
}

namespace {

/// Re-solves the equality-constrained problem on the final working set to remove the
/// rounding accumulated by the incremental updates. Null-space method: A_w^T = Q R,
/// x = Q1 R^{-T} b + Q2 z, z from the reduced least-squares problem. Kept only if it
/// stays primal and dual feasible.
void polish(const QpProblem& problem, double regularization, const MatrixXd& a_in, const VectorXd& b_in,
            const MatrixXd& a_eq, const VectorXd& b_eq, const std::vector<Active>& active, double tol,
            VectorXd& x, QpSolution& sol) {
    const Index n = x.size();
    const auto m = static_cast<Index>(active.size());
    if (m > n) return;
    MatrixXd a(m, n);
    VectorXd b(m);
    for (Index k = 0; k < m; ++k) {
        const auto& w = active[static_cast<std::size_t>(k)];
        a.row(k) = w.equality ? a_eq.row(w.row) : a_in.row(w.row);
        b(k) = w.equality ? b_eq(w.row) : b_in(w.row);
    }
    const Eigen::HouseholderQR<MatrixXd> qr(a.transpose());
    const MatrixXd q = qr.householderQ();
    const auto r = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
    if ((r.toDenseMatrix().diagonal().cwiseAbs().array() < kDependence).any()) return;
    const MatrixXd q1 = q.leftCols(m);
    const MatrixXd q2 = q.rightCols(n - m);

    const VectorXd x0 = q1 * r.transpose().solve(b);
    const double root_reg = std::sqrt(regularization);
    MatrixXd cz(problem.lsq_matrix.rows() + n, n - m);
    cz << problem.lsq_matrix * q2, root_reg * q2;
    VectorXd rhs(problem.lsq_matrix.rows() + n);
    rhs << problem.lsq_rhs - problem.lsq_matrix * x0, -root_reg * x0;
    const VectorXd z = n > m ? VectorXd(cz.colPivHouseholderQr().solve(rhs)) : VectorXd::Zero(0);
    const VectorXd xp = x0 + q2 * z;

    // A_w^T lambda = C^T (d - C x) - reg x
    const VectorXd g = problem.lsq_matrix.transpose() * (problem.lsq_rhs - problem.lsq_matrix * xp) -
                       regularization * xp;
    const VectorXd lambda = r.solve(q1.transpose() * g);
    if (!xp.allFinite() || !lambda.allFinite()) return;

    double violation = 0.0;
    if (a_in.rows()) violation = std::max(violation, (a_in * xp - b_in).maxCoeff());
    if (a_eq.rows()) violation = std::max(violation, (a_eq * xp - b_eq).cwiseAbs().maxCoeff());
    if (violation > tol) return;
    VectorXd ineq_mult = VectorXd::Zero(a_in.rows());
    VectorXd eq_mult = VectorXd::Zero(a_eq.rows());
    for (Index k = 0; k < m; ++k) {
        const auto& wk = active[static_cast<std::size_t>(k)];
        if (wk.equality) {
            eq_mult(wk.row) = lambda(k);
        } else {
            if (lambda(k) < -tol) return;
            ineq_mult(wk.row) = std::max(lambda(k), 0.0);
        }
    }
    x = xp;
    sol.ineq_multipliers = std::move(ineq_mult);
    sol.eq_multipliers = std::move(eq_mult);
}

}  // namespace

QpSolution solve_qp(const QpProblem& problem, const QpOptions& options) {
    problem.validate();
    if (!(options.tolerance > 0.0)) throw InvalidConfiguration("QP tolerance must be positive");
    const Index n = problem.unknowns();
    const double tol = options.tolerance;

    // Inequalities in the form A x <= b, bounds appended as rows.
    MatrixXd a_in = problem.ineq_matrix.rows() ? problem.ineq_matrix : MatrixXd::Zero(0, n);
    VectorXd b_in = problem.ineq_rhs;
    auto append = [&](const MatrixXd& rows, const VectorXd& rhs) {
        MatrixXd a(a_in.rows() + rows.rows(), n);
        a << a_in, rows;
        VectorXd b(b_in.size() + rhs.size());
        b << b_in, rhs;
        a_in = std::move(a);
        b_in = std::move(b);
    };
    if (problem.upper) append(MatrixXd::Identity(n, n), *problem.upper);
    if (problem.lower) append(-MatrixXd::Identity(n, n), -*problem.lower);
    const MatrixXd a_eq = problem.eq_matrix.rows() ? problem.eq_matrix : MatrixXd::Zero(0, n);
    const VectorXd& b_eq = problem.eq_rhs;

    const Index m_in = a_in.rows();
    const Index m_eq = a_eq.rows();
    const std::size_t max_iter = options.max_iterations
                                     ? options.max_iterations
                                     : 10 * static_cast<std::size_t>(n + m_in + m_eq);

    const ScaledRows ineq = scale_rows(a_in, b_in);
    const ScaledRows eq = scale_rows(a_eq, b_eq);

    MatrixXd g(n, n);
    g.setZero();
    g.selfadjointView<Eigen::Lower>().rankUpdate(problem.lsq_matrix.transpose());
    g.diagonal().array() += options.regularization;
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    const VectorXd ctd = problem.lsq_matrix.transpose() * problem.lsq_rhs;

    Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) {
        throw InvalidConfiguration("normal matrix is not positive definite; increase regularization");
    }
    VectorXd x = llt.solve(ctd);
    MatrixXd j = llt.matrixU().solve(MatrixXd::Identity(n, n));  // L^{-T}

    ActiveSetFactor factor(std::move(j));
    std::vector<Active> active;
    std::vector<double> u;  // multipliers in the scaled system, parallel to `active`
    std::vector<char> is_active(static_cast<std::size_t>(m_in), 0);

    VectorXd d, z, r;
    QpSolution sol;
    std::size_t iter = 0;

    // Equalities first; dependent rows are left out and checked at the end.
    for (const Index row : independent_rows(eq.rows)) {
        const VectorXd normal = eq.rows.row(row).transpose();
        factor.directions(normal, d, z, r);
        const double slack = normal.dot(x) - eq.rhs(row);
        const double curvature = z.dot(normal);
        double t = 0.0;
        if (std::abs(curvature) > kDependence * d.squaredNorm()) t = -slack / curvature;
        x += t * z;
        for (std::size_t k = 0; k < u.size(); ++k) u[k] -= t * r(static_cast<Index>(k));
        if (factor.add(d)) {
            active.push_back({true, row});
            u.push_back(t);
        }
        ++iter;
    }

    QpStatus status = QpStatus::optimal;
    VectorXd slack(m_in);
    for (;;) {
        if (iter >= max_iter) {
            status = QpStatus::max_iterations;
            break;
        }
        ++iter;
        // Pick the most violated inequality (scaled), lowest index on ties.
        slack.noalias() = ineq.rhs - ineq.rows * x;
        Index p = -1;
        double worst = 0.0;
        for (Index i = 0; i < m_in; ++i) {
            if (is_active[static_cast<std::size_t>(i)]) continue;
            if (-slack(i) * ineq.norms(i) <= 0.1 * tol) continue;
            if (p < 0 || slack(i) < worst) {
                p = i;
                worst = slack(i);
            }
        }
        if (p < 0) break;

        const VectorXd normal = -ineq.rows.row(p).transpose();
        double sp = slack(p);  // normal^T x - (-b_p) = b_p - a_p^T x
        double u_new = 0.0;
        bool added = false;
        bool infeasible = false;
        while (!added) {
            if (iter >= max_iter) break;
            factor.directions(normal, d, z, r);
            const Index q = factor.size();
            // Dual step: largest step keeping active inequality multipliers non-negative.
            double t1 = kInf;
            Index drop = -1;
            for (Index k = 0; k < q; ++k) {
                const auto uk = static_cast<std::size_t>(k);
                if (active[uk].equality || r(k) <= 0.0) continue;
                const double ratio = u[uk] / r(k);
                if (ratio < t1) {
                    t1 = ratio;
                    drop = k;
                }
            }
            // Primal step: full step to satisfy the new constraint.
            double t2 = kInf;
            const double curvature = z.dot(normal);
            if (curvature > kDependence * d.squaredNorm()) t2 = -sp / curvature;
            const double t = std::min(t1, t2);
            if (t == kInf) {
                infeasible = true;
                break;
            }
            for (Index k = 0; k < q; ++k) u[static_cast<std::size_t>(k)] -= t * r(k);
            u_new += t;
            if (t2 < kInf) {
                x += t * z;
            }
            if (t2 <= t1) {
                if (factor.add(d)) {
                    active.push_back({false, p});
                    u.push_back(u_new);
                    is_active[static_cast<std::size_t>(p)] = 1;
                }
                added = true;
            } else {
                is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)].row)] = 0;
                active.erase(active.begin() + drop);
                u.erase(u.begin() + drop);
                factor.remove(drop);
                sp = normal.dot(x) + ineq.rhs(p);
                ++iter;
            }
        }
        if (infeasible) {
            status = QpStatus::infeasible;
            break;
        }
        if (!added) {
            status = QpStatus::max_iterations;
            break;
        }
    }

    sol.iterations = iter;
    sol.ineq_multipliers = VectorXd::Zero(m_in);
    sol.eq_multipliers = VectorXd::Zero(m_eq);
    for (std::size_t k = 0; k < active.size(); ++k) {
        const Index row = active[k].row;
        if (active[k].equality) {
            sol.eq_multipliers(row) = -u[k] / eq.norms(row);
        } else {
            sol.ineq_multipliers(row) = u[k] / ineq.norms(row);
            ++sol.active_inequalities;
        }
    }
    if (status == QpStatus::optimal && !active.empty()) {
        polish(problem, options.regularization, a_in, b_in, a_eq, b_eq, active, tol, x, sol);
    }
    sol.x = x;

    const VectorXd residual = problem.lsq_matrix * x - problem.lsq_rhs;
    sol.objective = 0.5 * residual.squaredNorm();
    VectorXd grad = problem.lsq_matrix.transpose() * residual;
    if (m_in) grad.noalias() += a_in.transpose() * sol.ineq_multipliers;
    if (m_eq) grad.noalias() += a_eq.transpose() * sol.eq_multipliers;
    sol.kkt_residual = grad.norm();

    double violation = 0.0;
    if (m_in) violation = std::max(violation, (a_in * x - b_in).maxCoeff());
    if (m_eq) violation = std::max(violation, (a_eq * x - b_eq).cwiseAbs().maxCoeff());
    sol.constraint_violation = violation;
    if (status == QpStatus::optimal && violation > tol) status = QpStatus::infeasible;
    sol.status = status;
    return sol;
}

}  // namespace evermap
