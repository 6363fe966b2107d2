#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "evermap/qp.hpp"
#include "qp_oracle.hpp"

using namespace evermap;
using Catch::Matchers::WithinAbs;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace qp_oracle;

namespace {

void check_certificate(const QpProblem& p, const QpSolution& s, double tol) {
    REQUIRE(s.status == QpStatus::optimal);
    CHECK(s.kkt_residual <= tol);
    CHECK(s.constraint_violation <= tol);
    VectorXd grad = p.lsq_matrix.transpose() * (p.lsq_matrix * s.x - p.lsq_rhs);
    if (p.ineq_matrix.rows()) grad += p.ineq_matrix.transpose() * s.ineq_multipliers;
    if (p.eq_matrix.rows()) grad += p.eq_matrix.transpose() * s.eq_multipliers;
    CHECK(grad.norm() <= tol);
    for (Eigen::Index i = 0; i < p.ineq_matrix.rows(); ++i) {
        const double slack = p.ineq_matrix.row(i).dot(s.x) - p.ineq_rhs(i);
        CHECK(s.ineq_multipliers(i) >= 0.0);
        CHECK(slack <= tol);
        CHECK(std::abs(s.ineq_multipliers(i) * slack) <= tol);
    }
    if (p.eq_matrix.rows()) CHECK((p.eq_matrix * s.x - p.eq_rhs).cwiseAbs().maxCoeff() <= tol);
}

}  // namespace

TEST_CASE("one-dimensional problems") {
    QpProblem p = QpProblem::least_squares(MatrixXd::Ones(1, 1), VectorXd::Constant(1, 2.0));
    SECTION("unconstrained") {
        const auto s = solve_qp(p);
        REQUIRE(s.status == QpStatus::optimal);
        CHECK_THAT(s.x(0), WithinAbs(2.0, 1e-9));
    }
    SECTION("x <= 1 is active") {
        p.ineq_matrix = MatrixXd::Ones(1, 1);
        p.ineq_rhs = VectorXd::Ones(1);
        const auto s = solve_qp(p);
        REQUIRE(s.status == QpStatus::optimal);
        CHECK_THAT(s.x(0), WithinAbs(1.0, 1e-12));
        CHECK(s.active_inequalities == 1);
        CHECK_THAT(s.ineq_multipliers(0), WithinAbs(1.0, 1e-9));
    }
    SECTION("inactive bound") {
        p.upper = VectorXd::Constant(1, 5.0);
        const auto s = solve_qp(p);
        CHECK_THAT(s.x(0), WithinAbs(2.0, 1e-9));
        CHECK(s.active_inequalities == 0);
    }
    SECTION("active lower bound") {
        p.lower = VectorXd::Constant(1, 3.0);
        const auto s = solve_qp(p);
        CHECK_THAT(s.x(0), WithinAbs(3.0, 1e-12));
    }
}

TEST_CASE("unconstrained solve equals the normal equations") {
    std::mt19937 rng(1);
    const MatrixXd c = random_matrix(30, 10, rng);
    const VectorXd d = random_vector(30, rng);
    const auto s = solve_qp(QpProblem::least_squares(c, d));
    const VectorXd ref = c.colPivHouseholderQr().solve(d);
    CHECK((s.x - ref).norm() <= 1e-8 * (1.0 + ref.norm()));
}

TEST_CASE("random 8-unknown problems match active-set enumeration") {
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_problem(rng, 8, 3, 0);
        const auto s = solve_qp(p);
        check_certificate(p, s, 1e-8);
        CHECK_THAT(s.objective, WithinAbs(enumerate_optimum(p), 1e-8));
    }
}

TEST_CASE("random problems up to 10 unknowns with equalities match enumeration") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> size(2, 10);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = size(rng);
        const int m_in = std::min(6, size(rng));
        const int m_eq = std::min(n - 1, trial % 3);
        const auto p = random_problem(rng, n, m_in, m_eq);
        const auto s = solve_qp(p);
        check_certificate(p, s, 1e-8);
        CHECK_THAT(s.objective, WithinAbs(enumerate_optimum(p), 1e-8));
    }
}

TEST_CASE("constraints never lower the objective") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_problem(rng, 6, 4, 1);
        const auto free = solve_qp(QpProblem::least_squares(p.lsq_matrix, p.lsq_rhs));
        const auto constrained = solve_qp(p);
        CHECK(constrained.objective >= free.objective - 1e-12);
    }
}

TEST_CASE("rank-deficient least squares with many constraints") {
    std::mt19937 rng(3);
    QpProblem p = QpProblem::least_squares(random_matrix(5, 12, rng), random_vector(5, rng));
    p.ineq_matrix = random_matrix(20, 12, rng);
    p.ineq_rhs = VectorXd::Constant(20, 0.1);
    const auto s = solve_qp(p);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK(s.constraint_violation <= 1e-8);
}

TEST_CASE("duplicate equality rows are tolerated") {
    QpProblem p = QpProblem::least_squares(MatrixXd::Identity(3, 3), VectorXd::Ones(3));
    p.eq_matrix = MatrixXd(3, 3);
    p.eq_matrix << 1, 1, 0, 2, 2, 0, 0, 0, 1;
    p.eq_rhs = VectorXd(3);
    p.eq_rhs << 1, 2, 0;
    const auto s = solve_qp(p);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK_THAT(s.x(0), WithinAbs(0.5, 1e-9));
    CHECK_THAT(s.x(1), WithinAbs(0.5, 1e-9));
    CHECK_THAT(s.x(2), WithinAbs(0.0, 1e-9));
}

TEST_CASE("infeasible problems are reported") {
    QpProblem p = QpProblem::least_squares(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
    SECTION("inconsistent equalities") {
        p.eq_matrix = MatrixXd(2, 2);
        p.eq_matrix << 1, 0, 1, 0;
        p.eq_rhs = VectorXd(2);
        p.eq_rhs << 1, 2;
        CHECK(solve_qp(p).status == QpStatus::infeasible);
    }
    SECTION("contradictory inequalities") {
        p.ineq_matrix = MatrixXd(2, 2);
        p.ineq_matrix << 1, 0, -1, 0;
        p.ineq_rhs = VectorXd(2);
        p.ineq_rhs << -1, -1;  // x <= -1 and x >= 1
        CHECK(solve_qp(p).status == QpStatus::infeasible);
    }
}

TEST_CASE("iteration cap") {
    std::mt19937 rng(4);
    auto p = random_problem(rng, 8, 6, 0);
    p.ineq_rhs = -p.ineq_rhs;  // push the unconstrained optimum out of several half-spaces
    QpOptions opt;
    opt.max_iterations = 1;
    const auto s = solve_qp(p, opt);
    if (s.status != QpStatus::optimal) CHECK(s.status == QpStatus::max_iterations);
}

TEST_CASE("deterministic output") {
    std::mt19937 rng(12);
    const auto p = random_problem(rng, 9, 5, 2);
    const auto a = solve_qp(p);
    const auto b = solve_qp(p);
    CHECK(a.x == b.x);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("malformed problems") {
    QpProblem p = QpProblem::least_squares(MatrixXd::Identity(2, 2), VectorXd::Zero(2));
    p.ineq_matrix = MatrixXd::Ones(1, 3);
    p.ineq_rhs = VectorXd::Ones(1);
    CHECK_THROWS(solve_qp(p));
    QpProblem q = QpProblem::least_squares(MatrixXd::Identity(2, 2), VectorXd::Zero(3));
    CHECK_THROWS(solve_qp(q));
    QpOptions bad;
    bad.tolerance = 0.0;
    CHECK_THROWS(solve_qp(QpProblem::least_squares(MatrixXd::Identity(2, 2), VectorXd::Zero(2)), bad));
}
