#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "evermap/errors.hpp"
#include "evermap/everett.hpp"
#include "evermap/oracle.hpp"
#include "evermap/preisach.hpp"
#include "support.hpp"

using namespace evermap;
using Catch::Matchers::WithinAbs;

namespace {

ConcentricLoop toy_loop(double peak, double h_tip) {
    // Closed symmetric loop, 21 points per branch: centre curve plus a lens that vanishes
    // at both tips.
    auto centre = [=](double b) { return h_tip * (0.5 * b / peak + 0.5 * std::tanh(2 * b / peak) / std::tanh(2.0)); };
    auto lens = [=](double b) { return 0.2 * h_tip * (1.0 - (b / peak) * (b / peak)); };
    ConcentricLoop loop;
    loop.peak_b = peak;
    const int n = 21;
    for (int k = 0; k < n; ++k) {
        const double b = peak * (1.0 - 2.0 * k / (n - 1));
        loop.descending.push_back({b, centre(b) + lens(b)});
    }
    for (int k = 0; k < n; ++k) {
        const double b = -peak * (1.0 - 2.0 * k / (n - 1));
        loop.ascending.push_back({b, centre(b) - lens(b)});
    }
    return loop;
}

// Integral of mu over {beta <= b <= a <= alpha}, by Gauss-Legendre on the triangle.
double triangle_integral(const EverettMap& map, double alpha, double beta) {
    static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                 0.9061798459386640};
    static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};
    // Split into sub-squares of the parameter grid so each piece is nearly polynomial.
    const int pieces = 40;
    const double len = alpha - beta;
    double sum = 0.0;
    for (int i = 0; i < pieces; ++i) {
        const double a0 = beta + len * i / pieces;
        const double a1 = beta + len * (i + 1) / pieces;
        for (int qa = 0; qa < 5; ++qa) {
            const double a = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * x[qa];
            const double wa = 0.5 * (a1 - a0) * w[qa];
            // inner integral over b in [beta, a]
            const int inner = std::max(1, static_cast<int>(std::ceil((a - beta) / len * pieces)));
            for (int j = 0; j < inner; ++j) {
                const double b0 = beta + (a - beta) * j / inner;
                const double b1 = beta + (a - beta) * (j + 1) / inner;
                for (int qb = 0; qb < 5; ++qb) {
                    const double b = 0.5 * (b0 + b1) + 0.5 * (b1 - b0) * x[qb];
                    sum += wa * 0.5 * (b1 - b0) * w[qb] * map.mu(a, b);
                }
            }
        }
    }
    return sum;
}

}  // namespace

TEST_CASE("sample extraction") {
    const std::vector<ConcentricLoop> loops{toy_loop(0.5, 100), toy_loop(1.0, 300), toy_loop(1.5, 500)};
    const auto samples = extract_samples(loops, 1.5, 500);

    SECTION("all samples lie on the upper half-plane") {
        for (const auto& s : samples) CHECK(s.alpha >= s.beta);
    }
    SECTION("tip of each loop is a zero diagonal sample") {
        for (const double a : {0.5 / 1.5, 1.0 / 1.5, 1.0}) {
            bool found = false;
            for (const auto& s : samples) found = found || (s.alpha == a && s.beta == a && s.xi == 0.0);
            CHECK(found);
        }
    }
    SECTION("both branches give the same value at the full-branch corner") {
        const auto& big = loops.back();
        const double h_tip = 0.5 * (big.descending.front().h + big.ascending.back().h);
        const double h_bot = 0.5 * (big.ascending.front().h + big.descending.back().h);
        const double expected = 0.5 * (h_tip - h_bot) / 500;
        int hits = 0;
        for (const auto& s : samples) {
            if (s.alpha == 1.0 && s.beta == -1.0) {
                CHECK_THAT(s.xi, WithinAbs(expected, 1e-15));
                ++hits;
            }
        }
        CHECK(hits == 2);
    }
    SECTION("descending samples follow (h_tip - h)/2") {
        const auto& loop = loops.front();
        const double h_tip = 0.5 * (loop.descending.front().h + loop.ascending.back().h);
        const auto& pt = loop.descending[5];
        bool found = false;
        for (const auto& s : samples) {
            if (s.alpha == 0.5 / 1.5 && s.beta == pt.b / 1.5) {
                CHECK_THAT(s.xi, WithinAbs(0.5 * (h_tip - pt.h) / 500, 1e-15));
                found = true;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("loop validation") {
    SECTION("open loop") {
        auto loop = toy_loop(1.0, 300);
        loop.ascending.back().h += 200;
        CHECK_THROWS_AS(check_loop(loop, 300), InvalidData);
    }
    SECTION("non-monotone branch") {
        auto loop = toy_loop(1.0, 300);
        std::swap(loop.descending[3], loop.descending[4]);
        CHECK_THROWS_AS(check_loop(loop, 300), InvalidData);
    }
    SECTION("branch does not reach the peak") {
        auto loop = toy_loop(1.0, 300);
        loop.descending.front().b = 0.9;
        CHECK_THROWS_AS(check_loop(loop, 300), InvalidData);
    }
    SECTION("duplicate peaks") {
        const std::vector<ConcentricLoop> loops{toy_loop(1.0, 300), toy_loop(1.0, 300)};
        CHECK_THROWS_AS(extract_samples(loops, 1.0, 300), InvalidData);
    }
    SECTION("too few loops to fit") {
        const std::vector<ConcentricLoop> loops{toy_loop(0.5, 100), toy_loop(1.0, 300)};
        CHECK_THROWS_AS(fit_everett(loops), InvalidData);
    }
}

TEST_CASE("mirroring") {
    const std::vector<EverettSample> s{{-0.5, 0.5, 0.2}, {0.1, 0.1, 0.0}, {-1.0, 0.3, 0.4}};
    const auto m = mirror_square(s);
    CHECK(m.size() == 2 * 2 + 1);
    CHECK(m[3].beta == 0.5);
    CHECK(m[3].alpha == -0.5);
    CHECK(m[3].xi == 0.2);
}

TEST_CASE("unconstrained fit is plain least squares") {
    const auto& loops = fixtures::clean_loops();
    EverettFitConfig cfg;
    cfg.constraints_enabled = false;
    cfg.mirror = true;
    cfg.ridge = 0.0;
    cfg.slope_penalty = 0.0;
    const auto map = fit_everett(loops, cfg);

    const auto samples = mirror_square(extract_samples(loops, map.b_norm(), map.h_norm()));
    std::vector<SurfaceSample> ss;
    for (const auto& s : samples) ss.push_back({0.5 * (s.beta + 1.0), 0.5 * (s.alpha + 1.0), s.xi});
    const auto k = clamped_uniform_knots(20, 3);
    const auto [c, d] = assemble_lsq(ss, k, k);
    const Eigen::VectorXd ref = c.colPivHouseholderQr().solve(d);
    const auto net = to_control_net(ref, 20, 20);
    CHECK((map.surface().control_net() - net).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK_FALSE(map.meta().constrained);
    CHECK(map.meta().inequality_rows == 0);

    SECTION("mirrored data gives a symmetric surface") {
        double worst = 0.0;
        for (int i = 0; i < 30; ++i) {
            for (int j = 0; j < 30; ++j) {
                const double u = i / 29.0;
                const double v = j / 29.0;
                worst = std::max(worst, std::abs(eval_surface(map.surface(), u, v) - eval_surface(map.surface(), v, u)));
            }
        }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("constrained fit on noise-free oracle loops") {
    const auto& map = fixtures::clean_map();
    const double h_sat = map.h_sat();
    const double bound = map.input_bound();

    CHECK(map.meta().constrained);
    CHECK(map.meta().kkt_residual <= 1e-8);
    CHECK(map.meta().constraint_violation <= 1e-8);
    CHECK_THAT(map.b_norm(), WithinAbs(1.5, 1e-12));
    CHECK_THAT(map.h_norm(), WithinAbs(1500.0, 1e-9));

    SECTION("the three constraints") {
        const auto c = check_constraints(map);
        CHECK(c.diagonal_max_abs <= 1e-6 * h_sat);
        CHECK(c.peak_error <= 1e-6 * h_sat);
        CHECK(c.min_mu >= -1e-6 * c.max_mu);
        CHECK(c.monotone_violation <= 1e-6 * h_sat);
    }

    SECTION("positivity holds off the check grid too") {
        std::mt19937 rng(17);
        std::uniform_real_distribution<double> unit(-bound, bound);
        const double scale = check_constraints(map).max_mu;
        for (int n = 0; n < 5000; ++n) {
            double a = unit(rng);
            double b = unit(rng);
            if (a < b) std::swap(a, b);
            CHECK(map.mu(a, b) >= -1e-6 * scale);
        }
    }

    SECTION("xi leaves the diagonal with non-negative slope") {
        for (int k = 0; k <= 1000; ++k) {
            const double t = k / 1000.0;
            CHECK(eval_surface_derivative(map.surface(), t, t, {0, 1}) >= -1e-8);
        }
    }

    SECTION("distribution integrates to h_sat") {
        const auto grid = distribution(map, 400);
        CHECK(std::abs(grid.integral() - h_sat) <= 0.005 * h_sat);
    }

    SECTION("distribution grid layout") {
        const auto g2 = distribution(map, 2);
        REQUIRE(g2.points.size() == 3);
        CHECK(g2.points[0].alpha == -bound);
        CHECK(g2.points[0].beta == -bound);
        CHECK(g2.points[1].alpha == bound);
        CHECK(g2.points[1].beta == -bound);
        CHECK(g2.points[2].alpha == bound);
        CHECK(g2.points[2].beta == bound);
        CHECK_THROWS_AS(distribution(map, 1), InvalidConfiguration);
    }

    SECTION("mu integrated over random triangles reproduces xi") {
        std::mt19937 rng(23);
        std::uniform_real_distribution<double> unit(-bound, bound);
        for (int n = 0; n < 20; ++n) {
            double a = unit(rng);
            double b = unit(rng);
            if (a < b) std::swap(a, b);
            CHECK(std::abs(triangle_integral(map, a, b) - map.query_xi(b, a)) <= 0.005 * h_sat);
        }
    }

    SECTION("xi matches the oracle's triangle sums") {
        std::mt19937 rng(29);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (int n = 0; n < 200; ++n) {
            double a = unit(rng);
            double b = unit(rng);
            if (a < b) std::swap(a, b);
            const double ref = h_sat * everett_reference(fixtures::oracle_grid(), a, b);
            CHECK(std::abs(map.query_xi(b * bound, a * bound) - ref) <= 0.01 * h_sat);
        }
    }

    SECTION("branches are monotone") {
        for (const double a : {-0.8, -0.2, 0.0, 0.45, 1.0}) {
            double prev = map.query_xi(-bound, a);
            for (int k = 1; k <= 400; ++k) {
                const double beta = -bound + (a + bound) * k / 400.0;
                const double cur = map.query_xi(beta, a);
                CHECK(cur <= prev + 1e-6 * h_sat);
                prev = cur;
            }
        }
    }

    SECTION("source loops are reproduced") {
        double sq = 0.0;
        std::size_t count = 0;
        for (const auto& loop : fixtures::clean_loops()) {
            std::vector<double> b;
            std::vector<double> h;
            for (const auto& p : loop.descending) {
                b.push_back(p.b);
                h.push_back(p.h);
            }
            for (const auto& p : loop.ascending) {
                b.push_back(p.b);
                h.push_back(p.h);
            }
            // Two warm-up cycles bring the model onto the stabilized loop first.
            std::vector<double> drive{loop.peak_b, -loop.peak_b, loop.peak_b};
            drive.insert(drive.end(), b.begin(), b.end());
            const auto out = simulate(map, Waveform::from_values(drive), InitialState::demagnetized());
            for (std::size_t k = 0; k < b.size(); ++k) {
                const double d = out[k + 3].h - h[k];
                sq += d * d;
                ++count;
            }
        }
        CHECK(std::sqrt(sq / static_cast<double>(count)) <= 0.01 * h_sat);
    }

    SECTION("out-of-range queries") {
        CHECK_THROWS_AS(map.query_xi(-1.1 * bound, 0.0), DomainError);
        CHECK_THROWS_AS(map.query_xi(0.0, std::nan("")), DomainError);
    }
}

TEST_CASE("artifact elimination on noisy loops") {
    const auto unconstrained = check_constraints(fixtures::noisy_unconstrained_map());
    CHECK(unconstrained.min_mu < 0.0);
    const auto constrained = check_constraints(fixtures::noisy_map());
    CHECK(constrained.min_mu >= -1e-6 * constrained.max_mu);
}

TEST_CASE("pointwise collocation mode") {
    EverettFitConfig cfg;
    cfg.positivity = PositivityRows::collocation;
    cfg.collocation_density = 2;
    const auto map = fit_everett(fixtures::clean_loops(), cfg);
    const auto k = clamped_uniform_knots(20, 3);
    // mu >= 0 holds at every upper-half collocation point.
    const auto pts = collocation_points(k, 2);
    for (const double u : pts) {
        for (const double v : pts) {
            if (v < u) continue;
            CHECK(eval_surface_derivative(map.surface(), u, v, {1, 1}) <= 1e-8);
        }
    }
}

TEST_CASE("collocation and diagonal points") {
    const auto k = clamped_uniform_knots(5, 3);
    const auto c1 = collocation_points(k, 1);
    CHECK(c1 == greville_points(k));
    const auto c2 = collocation_points(k, 2);
    CHECK(c2.size() == 9);
    CHECK_THAT(c2[1], WithinAbs(1.0 / 12, 1e-15));
    CHECK_THROWS_AS(collocation_points(k, 0), InvalidConfiguration);

    const auto d = diagonal_points(k, k);
    CHECK(d.size() == 2 * 7 + 2);
    for (const auto& p : d) CHECK(p.u == p.v);
}

TEST_CASE("control-net positivity rows") {
    const auto k = clamped_uniform_knots(6, 3);
    const auto rows = control_net_positivity_rows(k, k);
    // Every (i, j) difference whose support reaches v >= u; the far lower corner is free.
    CHECK(rows.rows() > 0);
    CHECK(rows.rows() < 25);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        CHECK(rows.row(r).sum() == 0.0);
        CHECK((rows.row(r).array() != 0.0).count() == 4);
    }
    // A net with non-positive second differences has S_uv <= 0 everywhere.
    Eigen::MatrixXd net(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) net(i, j) = -0.1 * i * j + 0.3 * j;
    const SplineSurface s(k, k, net);
    for (int a = 0; a <= 20; ++a)
        for (int b = a; b <= 20; ++b) CHECK(eval_surface_derivative(s, a / 20.0, b / 20.0, {1, 1}) <= 1e-12);
}

namespace {

Eigen::MatrixXd random_net(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd net(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < net.rows(); ++i)
        for (Eigen::Index j = 0; j < net.cols(); ++j) net(i, j) = g(rng);
    return net;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& net) {
    Eigen::VectorXd x(net.size());
    for (Eigen::Index i = 0; i < net.rows(); ++i)
        for (Eigen::Index j = 0; j < net.cols(); ++j) x(i * net.cols() + j) = net(i, j);
    return x;
}

}  // namespace

TEST_CASE("Bernstein positivity rows") {
    const auto k = clamped_uniform_knots(6, 3);  // cells of width 1/3
    const std::size_t sub = 2;
    const auto rows = bernstein_positivity_rows(k, k, sub);
    // Sub-cells of width 1/6 that reach v >= u: 6 * 7 / 2, nine coefficients each.
    REQUIRE(rows.rows() == 21 * 9);
    CHECK_THROWS_AS(bernstein_positivity_rows(k, k, 0), InvalidConfiguration);

    const auto net = random_net(6, 41);
    const SplineSurface s(k, k, net);
    const Eigen::VectorXd coeff = rows * flatten(net);
    Eigen::Index block = 0;
    for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
            if (b < a) continue;
            const double u0 = a / 6.0, u1 = (a + 1) / 6.0, v0 = b / 6.0, v1 = (b + 1) / 6.0;
            const auto c = coeff.segment(9 * block, 9);
            // Corner coefficients interpolate; every value lies in their hull.
            CHECK_THAT(c(0), WithinAbs(eval_surface_derivative(s, u0, v0, {1, 1}), 1e-9));
            CHECK_THAT(c(2), WithinAbs(eval_surface_derivative(s, u0, v1, {1, 1}), 1e-9));
            CHECK_THAT(c(6), WithinAbs(eval_surface_derivative(s, u1, v0, {1, 1}), 1e-9));
            CHECK_THAT(c(8), WithinAbs(eval_surface_derivative(s, u1, v1, {1, 1}), 1e-9));
            for (int i = 0; i <= 8; ++i) {
                for (int j = 0; j <= 8; ++j) {
                    const double val = eval_surface_derivative(s, u0 + (u1 - u0) * i / 8, v0 + (v1 - v0) * j / 8, {1, 1});
                    CHECK(val <= c.maxCoeff() + 1e-9);
                    CHECK(val >= c.minCoeff() - 1e-9);
                }
            }
            ++block;
        }
    }
}

TEST_CASE("diagonal slope rows") {
    const auto k = clamped_uniform_knots(7, 3);  // four pieces
    const auto rows = diagonal_slope_rows(k, k, 1);
    REQUIRE(rows.rows() == 4 * 6);
    CHECK(diagonal_slope_rows(k, k, 3).rows() == 12 * 6);
    const auto net = random_net(7, 43);
    const SplineSurface s(k, k, net);
    const Eigen::VectorXd coeff = -(rows * flatten(net));
    for (int piece = 0; piece < 4; ++piece) {
        const double t0 = piece / 4.0, t1 = (piece + 1) / 4.0;
        const auto c = coeff.segment(6 * piece, 6);
        CHECK_THAT(c(0), WithinAbs(eval_surface_derivative(s, t0, t0, {0, 1}), 1e-9));
        CHECK_THAT(c(5), WithinAbs(eval_surface_derivative(s, t1, t1, {0, 1}), 1e-9));
        for (int i = 0; i <= 20; ++i) {
            const double t = t0 + (t1 - t0) * i / 20;
            const double val = eval_surface_derivative(s, t, t, {0, 1});
            CHECK(val <= c.maxCoeff() + 1e-9);
            CHECK(val >= c.minCoeff() - 1e-9);
        }
    }
}

TEST_CASE("slope penalty pulls the diagonal slope toward zero") {
    auto slope_integral = [](const EverettMap& m) {
        double sum = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const double t = (k + 0.5) / 1000;
            sum += eval_surface_derivative(m.surface(), t, t, {0, 1}) / 1000;
        }
        return sum * m.h_norm();
    };
    EverettFitConfig cfg;
    cfg.slope_penalty = 0.0;
    const auto loose = fit_everett(fixtures::clean_loops(), cfg);
    const double with = slope_integral(fixtures::clean_map());
    CHECK(with >= 0.0);
    CHECK(with < 0.25 * slope_integral(loose));
    cfg.slope_penalty = -1.0;
    CHECK_THROWS_AS(fit_everett(fixtures::clean_loops(), cfg), InvalidConfiguration);

    SECTION("zero slope as an equality") {
        EverettFitConfig strict;
        strict.diagonal_slope = DiagonalSlope::zero;
        const auto map = fit_everett(fixtures::clean_loops(), strict);
        for (int k = 0; k <= 200; ++k) {
            const double t = k / 200.0;
            CHECK(std::abs(eval_surface_derivative(map.surface(), t, t, {0, 1})) <= 1e-8);
        }
        CHECK(std::abs(distribution(map, 400).integral() - map.h_sat()) <= 1e-3 * map.h_sat());
    }
}
