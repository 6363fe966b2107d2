#pragma once

/**
 * @file bspline.hpp
 * @brief Clamped uniform B-spline bases and scalar tensor-product surfaces.
 *
 * All parameter domains are the unit interval / unit square. Knot vectors
 * are clamped (end knots repeated degree+1 times) with uniformly spaced
 * interior knots, so a parameter value maps affinely onto a position on the
 * surface.
 *
 * Derivatives of the basis are computed with the classic recursion
 *
 *   N^(k)_{i,p} = p * ( N^(k-1)_{i,p-1} / (t_{i+p} - t_i)
 *                     - N^(k-1)_{i+1,p-1} / (t_{i+p+1} - t_{i+1}) )
 *
 * where a term with a zero knot difference contributes zero.
 */

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace evermap {

/// Clamped knot vector on [0,1] with uniformly spaced interior knots.
class KnotVector {
public:
    /// Validates the clamped/uniform invariants; throws InvalidConfiguration.
    KnotVector(std::vector<double> values, int degree);

    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] std::size_t num_basis() const noexcept {
        return values_.size() - static_cast<std::size_t>(degree_) - 1;
    }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    /// Index s of the knot span [t_s, t_{s+1}) containing u; u == 1 maps to the last
    /// non-degenerate span.
    [[nodiscard]] std::size_t find_span(double u) const;

    friend bool operator==(const KnotVector&, const KnotVector&) = default;

private:
    std::vector<double> values_;
    int degree_;
};

/// Builds a clamped knot vector with (num_basis - degree - 1) uniform interior knots.
KnotVector clamped_uniform_knots(std::size_t num_basis, int degree);

struct BasisValue {
    std::size_t index;
    double value;
};

/// Values of the degree+1 basis functions that are nonzero on the span containing u.
std::vector<BasisValue> eval_basis(const KnotVector& knots, double u);

/// k-th derivatives of the locally nonzero basis functions at u (0 <= k <= degree).
std::vector<BasisValue> eval_basis_derivative(const KnotVector& knots, double u, int k);

/// Greville abscissae: one collocation point per basis function.
std::vector<double> greville_points(const KnotVector& knots);

struct DerivativeOrder {
    int k = 0;  ///< order in u
    int l = 0;  ///< order in v
};

/// Scalar non-rational B-spline surface over [0,1]^2.
///
/// The control net is indexed (i, j) with i running along u and j along v.
class SplineSurface {
public:
    SplineSurface(KnotVector knots_u, KnotVector knots_v, Eigen::MatrixXd control_net);

    [[nodiscard]] const KnotVector& knots_u() const noexcept { return knots_u_; }
    [[nodiscard]] const KnotVector& knots_v() const noexcept { return knots_v_; }
    [[nodiscard]] int degree_u() const noexcept { return knots_u_.degree(); }
    [[nodiscard]] int degree_v() const noexcept { return knots_v_.degree(); }
    [[nodiscard]] const Eigen::MatrixXd& control_net() const noexcept { return control_net_; }

private:
    KnotVector knots_u_;
    KnotVector knots_v_;
    Eigen::MatrixXd control_net_;
};

double eval_surface(const SplineSurface& surface, double u, double v);

double eval_surface_derivative(const SplineSurface& surface, double u, double v,
                               DerivativeOrder order);

/// Throws DomainError if the order exceeds either degree or is negative.
void check_derivative_order(DerivativeOrder order, int degree_u, int degree_v);

}  // namespace evermap
