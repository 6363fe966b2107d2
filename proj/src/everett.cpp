#include "evermap/everett.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "evermap/errors.hpp"
#include "evermap/fitting.hpp"

namespace evermap {

namespace {

constexpr double kRangeSlack = 1e-12;

bool close_to(double a, double b, double tol) { return std::abs(a - b) <= tol; }

double tip_h(const ConcentricLoop& loop) {
    return 0.5 * (loop.descending.front().h + loop.ascending.back().h);
}

double bottom_h(const ConcentricLoop& loop) {
    return 0.5 * (loop.ascending.front().h + loop.descending.back().h);
}

const ConcentricLoop& largest_loop(std::span<const ConcentricLoop> loops) {
    return *std::max_element(loops.begin(), loops.end(), [](const auto& a, const auto& b) {
        return a.peak_b < b.peak_b;
    });
}

std::vector<double> breakpoints(const KnotVector& a, const KnotVector& b) {
    std::vector<double> out(a.values().begin(), a.values().end());
    out.insert(out.end(), b.values().begin(), b.values().end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> unique_knots(const KnotVector& k) {
    std::vector<double> out(k.values().begin(), k.values().end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Sample abscissae in [0,1] for a degree-n polynomial and the inverse of the Bernstein
/// collocation matrix there, so that coefficients = inverse * values.
struct BernsteinFit {
    std::vector<double> t;
    Eigen::MatrixXd inverse;
};

BernsteinFit bernstein_fit(int n) {
    BernsteinFit fit;
    if (n == 0) {
        fit.t = {0.5};
        fit.inverse = Eigen::MatrixXd::Ones(1, 1);
        return fit;
    }
    Eigen::MatrixXd m(n + 1, n + 1);
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        fit.t.push_back(t);
        double binom = 1.0;
        for (int j = 0; j <= n; ++j) {
            m(i, j) = binom * std::pow(t, j) * std::pow(1.0 - t, n - j);
            binom = binom * (n - j) / (j + 1);
        }
    }
    fit.inverse = m.inverse();
    return fit;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    out.back() = hi;
    return out;
}

}  // namespace

void check_loop(const ConcentricLoop& loop, double h_scale, const LoopTolerance& tol) {
    const double peak = loop.peak_b;
    const std::string tag = "loop with peak " + std::to_string(peak) + " T: ";
    if (!std::isfinite(peak) || peak <= 0.0) throw InvalidData(tag + "peak must be positive");
    if (loop.descending.size() < 2 || loop.ascending.size() < 2) {
        throw InvalidData(tag + "each branch needs at least two points");
    }
    for (const auto* branch : {&loop.descending, &loop.ascending}) {
        for (const auto& pt : *branch) {
            if (!std::isfinite(pt.b) || !std::isfinite(pt.h)) throw InvalidData(tag + "non-finite point");
        }
    }
    const double tb = tol.b_relative * peak;
    if (!close_to(loop.descending.front().b, peak, tb) || !close_to(loop.descending.back().b, -peak, tb) ||
        !close_to(loop.ascending.front().b, -peak, tb) || !close_to(loop.ascending.back().b, peak, tb)) {
        throw InvalidData(tag + "branches do not run between -peak and +peak");
    }
    for (std::size_t k = 1; k < loop.descending.size(); ++k) {
        if (loop.descending[k].b > loop.descending[k - 1].b) {
            throw InvalidData(tag + "descending branch is not monotone at point " + std::to_string(k));
        }
    }
    for (std::size_t k = 1; k < loop.ascending.size(); ++k) {
        if (loop.ascending[k].b < loop.ascending[k - 1].b) {
            throw InvalidData(tag + "ascending branch is not monotone at point " + std::to_string(k));
        }
    }
    const double th = tol.h_relative * std::abs(h_scale);
    if (!close_to(loop.descending.front().h, loop.ascending.back().h, th) ||
        !close_to(loop.descending.back().h, loop.ascending.front().h, th)) {
        throw InvalidData(tag + "loop is not closed (H mismatch at the tips)");
    }
}

std::vector<EverettSample> extract_samples(std::span<const ConcentricLoop> loops, double b_norm,
                                           double h_norm, const LoopTolerance& tol) {
    if (loops.empty()) throw InvalidData("no loops given");
    if (!(b_norm > 0.0) || !(h_norm > 0.0)) throw InvalidConfiguration("normalization factors must be positive");
    {
        std::set<double> peaks;
        for (const auto& loop : loops) {
            if (!peaks.insert(loop.peak_b).second) {
                throw InvalidData("duplicate loop peak " + std::to_string(loop.peak_b) + " T");
            }
        }
    }
    const double h_scale = std::abs(tip_h(largest_loop(loops)));
    std::vector<EverettSample> out;
    for (const auto& loop : loops) {
        check_loop(loop, h_scale, tol);
        const double peak = loop.peak_b;
        const double a = peak / b_norm;
        const double tb = tol.b_relative * peak;
        const double h_tip = tip_h(loop);
        const double h_bot = bottom_h(loop);
        for (const auto& pt : loop.descending) {
            if (close_to(pt.b, peak, tb)) continue;
            const double b = std::clamp(pt.b, -peak, peak);
            out.push_back({b / b_norm, a, 0.5 * (h_tip - pt.h) / h_norm});
        }
        for (const auto& pt : loop.ascending) {
            if (close_to(pt.b, -peak, tb)) continue;
            const double b = std::clamp(pt.b, -peak, peak);
            out.push_back({-a, b / b_norm, 0.5 * (pt.h - h_bot) / h_norm});
        }
        out.push_back({a, a, 0.0});
        out.push_back({-a, -a, 0.0});
    }
    return out;
}

std::vector<EverettSample> mirror_square(std::span<const EverettSample> samples) {
    std::vector<EverettSample> out(samples.begin(), samples.end());
    for (const auto& s : samples) {
        if (s.alpha > s.beta) out.push_back({s.alpha, s.beta, s.xi});
    }
    return out;
}

EverettMap::EverettMap(SplineSurface surface, double b_norm, double h_norm, double b_sat,
                       double h_sat, FitMeta meta)
    : surface_(std::move(surface)),
      b_norm_(b_norm),
      h_norm_(h_norm),
      b_sat_(b_sat),
      h_sat_(h_sat),
      meta_(meta) {
    for (const double v : {b_norm, h_norm, b_sat, h_sat}) {
        if (!std::isfinite(v) || v <= 0.0) {
            throw InvalidConfiguration("Everett map scale factors must be positive and finite");
        }
    }
}

double EverettMap::to_param(double normalized_b) const {
    const double bound = input_bound();
    if (!std::isfinite(normalized_b) || std::abs(normalized_b) > bound * (1.0 + kRangeSlack)) {
        throw DomainError("input " + std::to_string(normalized_b * b_norm_) +
                          " T outside the identified range +-" + std::to_string(b_sat_) + " T");
    }
    return std::clamp(0.5 * (normalized_b / bound + 1.0), 0.0, 1.0);
}

double EverettMap::query_xi(double beta, double alpha) const {
    return h_norm_ * eval_surface(surface_, to_param(beta), to_param(alpha));
}

double EverettMap::mu(double alpha, double beta) const {
    const double span = 2.0 * input_bound();
    const double suv = eval_surface_derivative(surface_, to_param(beta), to_param(alpha), {1, 1});
    return -h_norm_ * suv / (span * span);
}

std::vector<double> collocation_points(const KnotVector& knots, std::size_t density) {
    if (density == 0) throw InvalidConfiguration("collocation density must be at least 1");
    auto g = greville_points(knots);
    g.erase(std::unique(g.begin(), g.end()), g.end());
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < g.size(); ++k) {
        for (std::size_t s = 0; s < density; ++s) {
            out.push_back(g[k] + (g[k + 1] - g[k]) * static_cast<double>(s) / static_cast<double>(density));
        }
    }
    out.push_back(g.back());
    return out;
}

Eigen::MatrixXd control_net_positivity_rows(const KnotVector& knots_u, const KnotVector& knots_v) {
    // S_uv has coefficients proportional to P(i+1,j+1) - P(i+1,j) - P(i,j+1) + P(i,j), with a
    // positive factor, on the basis N(i+1, p-1)(u) N(j+1, q-1)(v).
    const int q = knots_v.degree();
    const auto nu = knots_u.num_basis();
    const auto nv = knots_v.num_basis();
    std::vector<std::pair<std::size_t, std::size_t>> keep;
    for (std::size_t i = 0; i + 1 < nu; ++i) {
        for (std::size_t j = 0; j + 1 < nv; ++j) {
            const double u_lo = knots_u[i + 1];
            const double v_hi = knots_v[j + static_cast<std::size_t>(q) + 1];
            if (v_hi > u_lo) keep.emplace_back(i, j);
        }
    }
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(keep.size()),
                                                 static_cast<Eigen::Index>(nu * nv));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto [i, j] = keep[r];
        const auto row = static_cast<Eigen::Index>(r);
        rows(row, control_index(i, j, nv)) = 1.0;
        rows(row, control_index(i + 1, j, nv)) = -1.0;
        rows(row, control_index(i, j + 1, nv)) = -1.0;
        rows(row, control_index(i + 1, j + 1, nv)) = 1.0;
    }
    return rows;
}

Eigen::MatrixXd bernstein_positivity_rows(const KnotVector& knots_u, const KnotVector& knots_v,
                                          std::size_t subdivision) {
    if (subdivision == 0) throw InvalidConfiguration("subdivision must be at least 1");
    const auto fu = bernstein_fit(knots_u.degree() - 1);
    const auto fv = bernstein_fit(knots_v.degree() - 1);
    const auto nu = static_cast<Eigen::Index>(fu.t.size());
    const auto nv = static_cast<Eigen::Index>(fv.t.size());
    const auto cols = static_cast<Eigen::Index>(knots_u.num_basis() * knots_v.num_basis());
    const auto bu = unique_knots(knots_u);
    const auto bv = unique_knots(knots_v);
    const auto sub = static_cast<double>(subdivision);

    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index total = 0;
    for (std::size_t a = 0; a + 1 < bu.size(); ++a) {
        for (std::size_t sa = 0; sa < subdivision; ++sa) {
            const double u0 = bu[a] + (bu[a + 1] - bu[a]) * static_cast<double>(sa) / sub;
            const double u1 = bu[a] + (bu[a + 1] - bu[a]) * static_cast<double>(sa + 1) / sub;
            for (std::size_t b = 0; b + 1 < bv.size(); ++b) {
                for (std::size_t sb = 0; sb < subdivision; ++sb) {
                    const double v0 = bv[b] + (bv[b + 1] - bv[b]) * static_cast<double>(sb) / sub;
                    const double v1 = bv[b] + (bv[b + 1] - bv[b]) * static_cast<double>(sb + 1) / sub;
                    if (!(v1 > u0)) continue;
                    std::vector<ParamPoint> pts;
                    for (const double tu : fu.t)
                        for (const double tv : fv.t) pts.push_back({u0 + (u1 - u0) * tu, v0 + (v1 - v0) * tv});
                    const auto values = assemble_derivative_rows(pts, {1, 1}, knots_u, knots_v);
                    Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(nu * nv, cols);
                    for (Eigen::Index i = 0; i < nu; ++i)
                        for (Eigen::Index j = 0; j < nv; ++j)
                            for (Eigen::Index x = 0; x < nu; ++x)
                                for (Eigen::Index y = 0; y < nv; ++y)
                                    coeff.row(i * nv + j) +=
                                        fu.inverse(i, x) * fv.inverse(j, y) * values.row(x * nv + y);
                    total += coeff.rows();
                    blocks.push_back(std::move(coeff));
                }
            }
        }
    }
    Eigen::MatrixXd rows(total, cols);
    Eigen::Index at = 0;
    for (const auto& blk : blocks) {
        rows.middleRows(at, blk.rows()) = blk;
        at += blk.rows();
    }
    return rows;
}

Eigen::MatrixXd diagonal_slope_rows(const KnotVector& knots_u, const KnotVector& knots_v,
                                    std::size_t subdivision) {
    if (subdivision == 0) throw InvalidConfiguration("subdivision must be at least 1");
    const auto fit = bernstein_fit(knots_u.degree() + knots_v.degree() - 1);
    const auto n = static_cast<Eigen::Index>(fit.t.size());
    const auto br = breakpoints(knots_u, knots_v);
    const auto sub = static_cast<double>(subdivision);
    const auto pieces = static_cast<Eigen::Index>((br.size() - 1) * subdivision);
    Eigen::MatrixXd rows(pieces * n, static_cast<Eigen::Index>(knots_u.num_basis() * knots_v.num_basis()));
    Eigen::Index at = 0;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
        for (std::size_t s = 0; s < subdivision; ++s) {
            const double t0 = br[k] + (br[k + 1] - br[k]) * static_cast<double>(s) / sub;
            const double t1 = br[k] + (br[k + 1] - br[k]) * static_cast<double>(s + 1) / sub;
            std::vector<ParamPoint> pts;
            for (const double t : fit.t) pts.push_back({t0 + (t1 - t0) * t, t0 + (t1 - t0) * t});
            const auto values = assemble_derivative_rows(pts, {0, 1}, knots_u, knots_v);
            rows.middleRows(at, n) = -(fit.inverse * values);
            at += n;
        }
    }
    return rows;
}

std::vector<ParamPoint> diagonal_points(const KnotVector& knots_u, const KnotVector& knots_v) {
    const auto breaks = breakpoints(knots_u, knots_v);
    const int per_piece = knots_u.degree() + knots_v.degree() + 1;
    std::vector<ParamPoint> out{{0.0, 0.0}};
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        for (int s = 0; s < per_piece; ++s) {
            const double t = breaks[k] + (breaks[k + 1] - breaks[k]) * (s + 0.5) / per_piece;
            out.push_back({t, t});
        }
    }
    out.push_back({1.0, 1.0});
    return out;
}

EverettProblem build_everett_problem(std::span<const ConcentricLoop> loops,
                                     const EverettFitConfig& config) {
    if (loops.size() < 3) throw InvalidData("need at least 3 concentric loops, got " + std::to_string(loops.size()));
    const auto& big = largest_loop(loops);
    if (big.descending.empty() || big.ascending.empty()) throw InvalidData("largest loop has an empty branch");
    const double b_sat = big.peak_b;
    const double h_sat = tip_h(big);
    if (!(h_sat > 0.0)) throw InvalidData("saturation H from the largest loop must be positive");
    const double b_norm = config.b_norm.value_or(b_sat);
    const double h_norm = config.h_norm.value_or(h_sat);
    const double bound = b_sat / b_norm;

    auto knots = clamped_uniform_knots(config.control_points, config.degree);
    auto samples = extract_samples(loops, b_norm, h_norm, config.loop_tolerance);
    if (config.mirror) samples = mirror_square(samples);
    std::vector<SurfaceSample> surface_samples;
    surface_samples.reserve(samples.size());
    auto param = [bound](double x) { return std::clamp(0.5 * (x / bound + 1.0), 0.0, 1.0); };
    for (const auto& s : samples) surface_samples.push_back({param(s.beta), param(s.alpha), s.xi});

    auto [c, d] = assemble_lsq(surface_samples, knots, knots);
    if (config.ridge < 0.0 || !std::isfinite(config.ridge)) throw InvalidConfiguration("ridge weight must be >= 0");
    if (config.slope_penalty < 0.0 || !std::isfinite(config.slope_penalty)) {
        throw InvalidConfiguration("slope penalty must be >= 0");
    }
    if (config.slope_penalty > 0.0) {
        // Midpoint rule for slope_penalty * samples * integral of S_v(t, t)^2 over [0, 1].
        constexpr int points = 400;
        std::vector<ParamPoint> diag;
        for (int k = 0; k < points; ++k) {
            const double t = (k + 0.5) / points;
            diag.push_back({t, t});
        }
        const double scale = std::sqrt(config.slope_penalty * static_cast<double>(surface_samples.size()) / points);
        const auto m = c.rows();
        c.conservativeResize(m + points, Eigen::NoChange);
        c.bottomRows(points) = scale * assemble_derivative_rows(diag, {0, 1}, knots, knots);
        d.conservativeResize(m + points);
        d.tail(points).setZero();
    }
    if (config.ridge > 0.0) {
        const auto n = c.cols();
        const auto m = c.rows();
        c.conservativeResize(m + n, Eigen::NoChange);
        c.bottomRows(n) = std::sqrt(config.ridge) * Eigen::MatrixXd::Identity(n, n);
        d.conservativeResize(m + n);
        d.tail(n).setZero();
    }
    QpProblem qp = QpProblem::least_squares(std::move(c), std::move(d));

    if (config.constraints_enabled) {
        // mu >= 0  <=>  S_uv <= 0, upper half v >= u only.
        if (config.positivity == PositivityRows::bernstein) {
            qp.ineq_matrix = bernstein_positivity_rows(knots, knots, config.subdivision);
        } else if (config.positivity == PositivityRows::control_net) {
            qp.ineq_matrix = control_net_positivity_rows(knots, knots);
        } else {
            const auto grid = collocation_points(knots, config.collocation_density);
            std::vector<ParamPoint> upper;
            for (const double u : grid) {
                for (const double v : grid) {
                    if (v >= u) upper.push_back({u, v});
                }
            }
            qp.ineq_matrix = assemble_derivative_rows(upper, {1, 1}, knots, knots);
        }

        auto diagonal = diagonal_points(knots, knots);
        if (config.diagonal_slope == DiagonalSlope::nonnegative) {
            // S_v >= 0 on the diagonal; S_u = -S_v there because S vanishes along it.
            const Eigen::MatrixXd slope = diagonal_slope_rows(knots, knots, config.subdivision);
            Eigen::MatrixXd rows(qp.ineq_matrix.rows() + slope.rows(), qp.ineq_matrix.cols());
            rows << qp.ineq_matrix, slope;
            qp.ineq_matrix = std::move(rows);
        }
        qp.ineq_rhs = Eigen::VectorXd::Zero(qp.ineq_matrix.rows());

        const auto peak_row = static_cast<Eigen::Index>(diagonal.size());
        diagonal.push_back({0.0, 1.0});
        qp.eq_matrix = assemble_derivative_rows(diagonal, {0, 0}, knots, knots);
        if (config.diagonal_slope == DiagonalSlope::zero) {
            diagonal.pop_back();
            const Eigen::MatrixXd slope = assemble_derivative_rows(diagonal, {0, 1}, knots, knots);
            Eigen::MatrixXd rows(qp.eq_matrix.rows() + slope.rows(), qp.eq_matrix.cols());
            rows << qp.eq_matrix, slope;
            qp.eq_matrix = std::move(rows);
        }
        qp.eq_rhs = Eigen::VectorXd::Zero(qp.eq_matrix.rows());
        qp.eq_rhs(peak_row) = h_sat / h_norm;
    }
    return {std::move(qp), knots, knots, b_norm, h_norm, b_sat, h_sat, samples.size()};
}

EverettMap fit_everett(std::span<const ConcentricLoop> loops, const EverettFitConfig& config) {
    auto problem = build_everett_problem(loops, config);
    QpOptions options;
    options.tolerance = config.tolerance;
    options.max_iterations = config.max_iterations;
    options.regularization = config.regularization;
    const QpSolution sol = solve_qp(problem.qp, options);
    if (sol.status != QpStatus::optimal) {
        throw FitFailure("Everett fit failed: solver status " + std::string(to_string(sol.status)) +
                             ", constraint violation " + std::to_string(sol.constraint_violation) +
                             ", KKT residual " + std::to_string(sol.kkt_residual) + " after " +
                             std::to_string(sol.iterations) + " iterations",
                         sol.status, sol.kkt_residual, sol.constraint_violation, sol.iterations);
    }
    FitMeta meta;
    meta.tolerance = config.tolerance;
    meta.kkt_residual = sol.kkt_residual;
    meta.constraint_violation = sol.constraint_violation;
    meta.constrained = config.constraints_enabled;
    meta.iterations = sol.iterations;
    meta.samples = problem.samples;
    meta.inequality_rows = static_cast<std::size_t>(problem.qp.ineq_matrix.rows());
    meta.equality_rows = static_cast<std::size_t>(problem.qp.eq_matrix.rows());
    const auto nu = problem.knots_u.num_basis();
    const auto nv = problem.knots_v.num_basis();
    SplineSurface surface(problem.knots_u, problem.knots_v, to_control_net(sol.x, nu, nv));
    return EverettMap(std::move(surface), problem.b_norm, problem.h_norm, problem.b_sat,
                      problem.h_sat, meta);
}

double DistributionGrid::min_mu() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : points) m = std::min(m, p.mu);
    return m;
}

double DistributionGrid::max_mu() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) m = std::max(m, p.mu);
    return m;
}

double DistributionGrid::integral() const {
    // points are stored row by row: alpha index i, beta index j <= i.
    auto at = [this](std::size_t i, std::size_t j) { return points[i * (i + 1) / 2 + j].mu; };
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
        const double h = axis[i + 1] - axis[i];
        for (std::size_t j = 0; j < i; ++j) {
            const double w = axis[j + 1] - axis[j];
            sum += 0.25 * (at(i, j) + at(i + 1, j) + at(i, j + 1) + at(i + 1, j + 1)) * h * w;
        }
        // Triangle above the diagonal inside the diagonal cell.
        sum += (at(i, i) + at(i + 1, i) + at(i + 1, i + 1)) / 3.0 * 0.5 * h * h;
    }
    return sum;
}

DistributionGrid distribution(const EverettMap& map, std::size_t resolution) {
    if (resolution < 2) throw InvalidConfiguration("distribution resolution must be at least 2");
    const double bound = map.input_bound();
    DistributionGrid grid;
    grid.axis = linspace(-bound, bound, resolution);
    grid.points.reserve(resolution * (resolution + 1) / 2);
    for (std::size_t i = 0; i < resolution; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double alpha = grid.axis[i];
            const double beta = grid.axis[j];
            grid.points.push_back({alpha, beta, map.mu(alpha, beta)});
        }
    }
    return grid;
}

ConstraintCheck check_constraints(const EverettMap& map, std::size_t diagonal_count, std::size_t grid) {
    const double bound = map.input_bound();
    ConstraintCheck out;
    for (const double x : linspace(-bound, bound, diagonal_count)) {
        out.diagonal_max_abs = std::max(out.diagonal_max_abs, std::abs(map.query_xi(x, x)));
    }
    out.peak_error = std::abs(map.query_xi(-bound, bound) - map.h_sat());
    const auto dist = distribution(map, grid);
    out.min_mu = dist.min_mu();
    out.max_mu = dist.max_mu();
    const auto axis = linspace(-bound, bound, grid);
    for (std::size_t i = 0; i < grid; ++i) {
        double prev = map.query_xi(axis[0], axis[i]);
        for (std::size_t j = 1; j <= i; ++j) {
            const double cur = map.query_xi(axis[j], axis[i]);
            out.monotone_violation = std::max(out.monotone_violation, cur - prev);
            prev = cur;
        }
    }
    return out;
}

}  // namespace evermap
