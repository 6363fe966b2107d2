#pragma once

// Assembly of least-squares and constraint rows for tensor-product B-spline
// surfaces. Unknown P_{i,j} lives in column i * num_basis_v + j.

#include <span>
#include <utility>

#include <Eigen/Dense>

#include "evermap/bspline.hpp"

namespace evermap {

struct SurfaceSample {
    double u;
    double v;
    double value;
};

struct ParamPoint {
    double u;
    double v;
};

inline Eigen::Index control_index(std::size_t i, std::size_t j, std::size_t num_basis_v) {
    return static_cast<Eigen::Index>(i * num_basis_v + j);
}

/// Builds (C, d): one row of tensor basis products per sample.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_lsq(std::span<const SurfaceSample> samples,
                                                         const KnotVector& knots_u,
                                                         const KnotVector& knots_v);

/// One row per point holding N^(k)_i(u) N^(l)_j(v); used for both constraint systems.
Eigen::MatrixXd assemble_derivative_rows(std::span<const ParamPoint> points, DerivativeOrder order,
                                         const KnotVector& knots_u, const KnotVector& knots_v);

/// Reshapes a solution vector into an (n_u x n_v) control net.
Eigen::MatrixXd to_control_net(const Eigen::VectorXd& x, std::size_t num_basis_u,
                               std::size_t num_basis_v);

}  // namespace evermap
