#pragma once

/**
 * @file everett.hpp
 * @brief Constrained B-spline Everett map fitted on concentric B-H loops.
 *
 * Conventions used throughout:
 *  - B is the model input, H the output.
 *  - Inputs are normalized by b_norm, outputs by h_norm.
 *  - xi(alpha, beta) is half of the H change along a descending branch from
 *    a reversal at alpha down to beta, so branch increments are +-2 xi and
 *    xi(b_sat, -b_sat) = h_sat.
 *  - The surface parameter u follows normalized beta, v follows normalized
 *    alpha; both map affinely from [-b_sat/b_norm, b_sat/b_norm] onto [0,1].
 *    The Preisach half-plane alpha >= beta is therefore v >= u.
 */

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "evermap/bspline.hpp"
#include "evermap/fitting.hpp"
#include "evermap/qp.hpp"

namespace evermap {

struct BhPoint {
    double b;  ///< T
    double h;  ///< A/m
};

struct ConcentricLoop {
    double peak_b = 0.0;
    std::vector<BhPoint> descending;  ///< +peak -> -peak
    std::vector<BhPoint> ascending;   ///< -peak -> +peak
};

struct EverettSample {
    double beta;
    double alpha;
    double xi;
};

struct LoopTolerance {
    double b_relative = 1e-6;  ///< branch end vs. peak, relative to the peak
    double h_relative = 0.1;   ///< H mismatch at the tips, relative to the largest tip H
};

/// Throws InvalidData when a loop is open or a branch is non-monotone in B.
void check_loop(const ConcentricLoop& loop, double h_scale, const LoopTolerance& tol = {});

/// Arranges loop data into normalized Everett samples on the half-plane alpha >= beta.
///
/// Descending point (b, h) of a loop with peak A gives (alpha=A, beta=b, (h_tip-h)/2);
/// ascending point (b, h) gives (alpha=b, beta=-A, (h-h_bot)/2). Each loop also
/// contributes the two zero samples (A, A) and (-A, -A).
std::vector<EverettSample> extract_samples(std::span<const ConcentricLoop> loops, double b_norm,
                                           double h_norm, const LoopTolerance& tol = {});

/// Adds the reflection (alpha, beta) -> (beta, alpha) of every strictly-upper sample.
std::vector<EverettSample> mirror_square(std::span<const EverettSample> samples);

struct FitMeta {
    double tolerance = 0.0;
    double kkt_residual = 0.0;
    double constraint_violation = 0.0;
    bool constrained = false;
    std::size_t iterations = 0;
    std::size_t samples = 0;
    std::size_t inequality_rows = 0;
    std::size_t equality_rows = 0;
};

class EverettMap {
public:
    EverettMap(SplineSurface surface, double b_norm, double h_norm, double b_sat, double h_sat,
               FitMeta meta = {});

    [[nodiscard]] const SplineSurface& surface() const noexcept { return surface_; }
    [[nodiscard]] double b_norm() const noexcept { return b_norm_; }
    [[nodiscard]] double h_norm() const noexcept { return h_norm_; }
    [[nodiscard]] double b_sat() const noexcept { return b_sat_; }
    [[nodiscard]] double h_sat() const noexcept { return h_sat_; }
    [[nodiscard]] const FitMeta& meta() const noexcept { return meta_; }

    /// Largest admissible normalized input, b_sat / b_norm.
    [[nodiscard]] double input_bound() const noexcept { return b_sat_ / b_norm_; }

    /// Surface parameter for a normalized input; DomainError outside the identified range.
    [[nodiscard]] double to_param(double normalized_b) const;

    /// Everett value in A/m for normalized (beta, alpha).
    [[nodiscard]] double query_xi(double beta, double alpha) const;

    /// mu(alpha, beta) = -d2 xi / (d alpha d beta) in A/m per normalized input squared.
    [[nodiscard]] double mu(double alpha, double beta) const;

private:
    SplineSurface surface_;
    double b_norm_;
    double h_norm_;
    double b_sat_;
    double h_sat_;
    FitMeta meta_;
};

/// How the mu >= 0 condition enters the QP.
enum class PositivityRows {
    /// Bernstein coefficients of S_uv on every (sub-divided) knot cell that reaches the
    /// upper half are non-positive. Holds everywhere on v >= u.
    bernstein,
    /// Second differences of the control net (the B-spline coefficients of S_uv) are
    /// non-positive for every coefficient whose support reaches the upper half. Holds
    /// everywhere on v >= u; coarser than `bernstein`.
    control_net,
    /// S_uv <= 0 at tensor collocation points with v >= u. Holds at those points only.
    collocation,
};

/// Treatment of d xi / d alpha along the diagonal.
enum class DiagonalSlope {
    free,
    /// >= 0, so branches leave a reversal in the right direction.
    nonnegative,
    /// == 0, as for any bounded mu; makes the integral of mu over a triangle equal xi.
    /// Stiff near the diagonal on coarse nets.
    zero,
};

struct EverettFitConfig {
    std::size_t control_points = 20;  ///< per axis
    int degree = 3;
    PositivityRows positivity = PositivityRows::bernstein;
    /// Sub-cells per knot interval and axis for the Bernstein rows.
    std::size_t subdivision = 2;
    /// Collocation points per Greville interval, used by PositivityRows::collocation.
    std::size_t collocation_density = 2;
    /// Also fit the reflection of every sample across the diagonal.
    bool mirror = false;
    DiagonalSlope diagonal_slope = DiagonalSlope::nonnegative;
    /// Weight, per sample, of the integral of (d xi / d alpha)^2 along the diagonal added to
    /// the objective. Loops only pin the diagonal at their tips; without this the fit can
    /// lean on a slope there that a bounded mu never has.
    double slope_penalty = 0.04;
    double tolerance = 1e-8;
    bool constraints_enabled = true;
    std::optional<double> b_norm;  ///< defaults to the largest peak B
    std::optional<double> h_norm;  ///< defaults to the largest loop's tip H
    /// Weight of the ridge term ridge * |x|^2 added to the fit objective. Control points
    /// below the diagonal see no data and are held near zero by it.
    double ridge = 1e-6;
    std::size_t max_iterations = 0;
    double regularization = 1e-10;  ///< QP-internal Hessian shift
    LoopTolerance loop_tolerance;
};

/// Raised when the QP does not return an optimal control net.
class FitFailure : public std::runtime_error {
public:
    FitFailure(const std::string& what, QpStatus status, double kkt_residual,
               double constraint_violation, std::size_t iterations)
        : std::runtime_error(what),
          status(status),
          kkt_residual(kkt_residual),
          constraint_violation(constraint_violation),
          iterations(iterations) {}

    QpStatus status;
    double kkt_residual;
    double constraint_violation;
    std::size_t iterations;
};

/// Collocation abscissae: Greville points with (density - 1) points inserted per interval.
std::vector<double> collocation_points(const KnotVector& knots, std::size_t density);

/// Rows R with R x <= 0 equivalent to non-positive S_uv B-spline coefficients, for every
/// coefficient whose support meets v >= u.
Eigen::MatrixXd control_net_positivity_rows(const KnotVector& knots_u, const KnotVector& knots_v);

/// Rows R with R x <= 0 equivalent to non-positive Bernstein coefficients of S_uv on each
/// knot cell, split into subdivision x subdivision sub-cells, that meets v >= u.
Eigen::MatrixXd bernstein_positivity_rows(const KnotVector& knots_u, const KnotVector& knots_v,
                                          std::size_t subdivision);

/// Rows R with R x <= 0 equivalent to non-negative Bernstein coefficients of S_v(t, t) on
/// each (sub-divided) polynomial piece of the diagonal.
Eigen::MatrixXd diagonal_slope_rows(const KnotVector& knots_u, const KnotVector& knots_v,
                                    std::size_t subdivision);

/// Points on the diagonal u = v that pin the diagonal restriction of the surface:
/// (degree_u + degree_v + 1) per polynomial piece.
std::vector<ParamPoint> diagonal_points(const KnotVector& knots_u, const KnotVector& knots_v);

/// Assembles the full constrained least-squares problem for a set of loops.
struct EverettProblem {
    QpProblem qp;
    KnotVector knots_u;
    KnotVector knots_v;
    double b_norm;
    double h_norm;
    double b_sat;
    double h_sat;
    std::size_t samples;
};

EverettProblem build_everett_problem(std::span<const ConcentricLoop> loops,
                                     const EverettFitConfig& config);

EverettMap fit_everett(std::span<const ConcentricLoop> loops, const EverettFitConfig& config = {});

struct DistributionPoint {
    double alpha;
    double beta;
    double mu;
};

struct DistributionGrid {
    std::vector<double> axis;               ///< normalized input values, ascending
    std::vector<DistributionPoint> points;  ///< alpha >= beta only

    [[nodiscard]] double min_mu() const;
    [[nodiscard]] double max_mu() const;
    /// Trapezoidal integral over the half-plane triangle (A/m).
    [[nodiscard]] double integral() const;
};

/// Samples mu on a resolution x resolution grid restricted to alpha >= beta.
DistributionGrid distribution(const EverettMap& map, std::size_t resolution);

/// Direct measurements of the three fit constraints on a map.
struct ConstraintCheck {
    double diagonal_max_abs = 0.0;  ///< max |xi(x,x)| over the diagonal samples (A/m)
    double peak_error = 0.0;        ///< |xi(-bound, bound) - h_sat| (A/m)
    double min_mu = 0.0;            ///< over the upper-half grid
    double max_mu = 0.0;
    /// Largest increase of xi(alpha, .) along increasing beta (A/m); 0 for a monotone map.
    double monotone_violation = 0.0;
};

ConstraintCheck check_constraints(const EverettMap& map, std::size_t diagonal_points = 200,
                                  std::size_t grid = 100);

}  // namespace evermap
