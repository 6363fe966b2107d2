#include "evermap/fitting.hpp"

#include "evermap/errors.hpp"

namespace evermap {

namespace {

void fill_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row, const std::vector<BasisValue>& bu,
              const std::vector<BasisValue>& bv, std::size_t num_basis_v) {
    for (const auto& [i, ni] : bu) {
        for (const auto& [j, nj] : bv) row(control_index(i, j, num_basis_v)) += ni * nj;
    }
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_lsq(std::span<const SurfaceSample> samples,
                                                         const KnotVector& knots_u,
                                                         const KnotVector& knots_v) {
    if (samples.empty()) throw InvalidData("least-squares assembly needs at least one sample");
    const auto nu = knots_u.num_basis();
    const auto nv = knots_v.num_basis();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples.size()),
                                              static_cast<Eigen::Index>(nu * nv));
    Eigen::VectorXd d(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t r = 0; r < samples.size(); ++r) {
        const auto& s = samples[r];
        const auto row = static_cast<Eigen::Index>(r);
        fill_row(c.row(row), eval_basis(knots_u, s.u), eval_basis(knots_v, s.v), nv);
        d(row) = s.value;
    }
    return {std::move(c), std::move(d)};
}

Eigen::MatrixXd assemble_derivative_rows(std::span<const ParamPoint> points, DerivativeOrder order,
                                         const KnotVector& knots_u, const KnotVector& knots_v) {
    check_derivative_order(order, knots_u.degree(), knots_v.degree());
    const auto nv = knots_v.num_basis();
    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()),
                                                 static_cast<Eigen::Index>(knots_u.num_basis() * nv));
    for (std::size_t r = 0; r < points.size(); ++r) {
        fill_row(rows.row(static_cast<Eigen::Index>(r)),
                 eval_basis_derivative(knots_u, points[r].u, order.k),
                 eval_basis_derivative(knots_v, points[r].v, order.l), nv);
    }
    return rows;
}

Eigen::MatrixXd to_control_net(const Eigen::VectorXd& x, std::size_t num_basis_u,
                               std::size_t num_basis_v) {
    if (static_cast<std::size_t>(x.size()) != num_basis_u * num_basis_v) {
        throw InvalidConfiguration("solution length does not match control net size");
    }
    Eigen::MatrixXd net(static_cast<Eigen::Index>(num_basis_u), static_cast<Eigen::Index>(num_basis_v));
    for (std::size_t i = 0; i < num_basis_u; ++i) {
        for (std::size_t j = 0; j < num_basis_v; ++j) {
            net(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                x(control_index(i, j, num_basis_v));
        }
    }
    return net;
}

}  // namespace evermap
