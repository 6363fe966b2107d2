#include "evermap/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evermap/errors.hpp"

namespace evermap {

namespace {

// Parameters within this distance of [0,1] are clamped instead of rejected, so
// affine maps that round a hair past an endpoint stay usable.
constexpr double kParamSlack = 1e-12;
constexpr double kKnotTolerance = 1e-12;

double checked_param(double u, const char* what) {
    if (!std::isfinite(u) || u < -kParamSlack || u > 1.0 + kParamSlack) {
        throw DomainError(std::string(what) + " parameter outside [0,1]: " + std::to_string(u));
    }
    return std::clamp(u, 0.0, 1.0);
}

// table[r][j] = N_{s-r+j, r}(u) for r = 0..p, j = 0..r.
std::vector<std::vector<double>> basis_table(const KnotVector& t, std::size_t s, double u) {
    const int p = t.degree();
    std::vector<std::vector<double>> table(static_cast<std::size_t>(p) + 1);
    table[0] = {1.0};
    std::vector<double> left(p + 1), right(p + 1);
    for (int r = 1; r <= p; ++r) {
        left[r] = u - t[s + 1 - r];
        right[r] = t[s + r] - u;
        const auto& prev = table[r - 1];
        auto& cur = table[r];
        cur.assign(static_cast<std::size_t>(r) + 1, 0.0);
        double saved = 0.0;
        for (int j = 0; j < r; ++j) {
            const double denom = right[j + 1] + left[r - j];
            const double tmp = denom == 0.0 ? 0.0 : prev[j] / denom;
            cur[j] = saved + right[j + 1] * tmp;
            saved = left[r - j] * tmp;
        }
        cur[r] = saved;
    }
    return table;
}

class DerivativeRecursion {
public:
    DerivativeRecursion(const KnotVector& t, std::size_t span, double u)
        : t_(t), span_(span), table_(basis_table(t, span, u)) {}

    // k-th derivative of N_{i,r}.
    double operator()(std::size_t i, int r, int k) const {
        if (k == 0) {
            const std::size_t lo = span_ - static_cast<std::size_t>(r);
            if (i < lo || i > span_) return 0.0;
            return table_[r][i - lo];
        }
        if (r == 0) return 0.0;
        const double dl = t_[i + r] - t_[i];
        const double dr = t_[i + r + 1] - t_[i + 1];
        const double left = dl == 0.0 ? 0.0 : (*this)(i, r - 1, k - 1) / dl;
        const double right = dr == 0.0 ? 0.0 : (*this)(i + 1, r - 1, k - 1) / dr;
        return r * (left - right);
    }

private:
    const KnotVector& t_;
    std::size_t span_;
    std::vector<std::vector<double>> table_;
};

}  // namespace

KnotVector::KnotVector(std::vector<double> values, int degree)
    : values_(std::move(values)), degree_(degree) {
    if (degree_ < 0) throw InvalidConfiguration("knot vector degree must be non-negative");
    const auto p1 = static_cast<std::size_t>(degree_) + 1;
    if (values_.size() < 2 * p1) {
        throw InvalidConfiguration("knot vector too short for degree " + std::to_string(degree_));
    }
    for (std::size_t i = 0; i < p1; ++i) {
        if (values_[i] != 0.0 || values_[values_.size() - 1 - i] != 1.0) {
            throw InvalidConfiguration("knot vector is not clamped on [0,1]");
        }
    }
    const std::size_t interior = values_.size() - 2 * p1;
    for (std::size_t k = 0; k < interior; ++k) {
        const double expected = static_cast<double>(k + 1) / static_cast<double>(interior + 1);
        if (std::abs(values_[p1 + k] - expected) > kKnotTolerance) {
            throw InvalidConfiguration("interior knots are not uniformly spaced");
        }
    }
}

std::size_t KnotVector::find_span(double u) const {
    const std::size_t n = num_basis() - 1;
    if (u >= values_[n + 1]) return n;
    const auto p = static_cast<std::size_t>(degree_);
    // Largest s in [p, n] with t_s <= u.
    const auto first = values_.begin() + static_cast<std::ptrdiff_t>(p);
    const auto last = values_.begin() + static_cast<std::ptrdiff_t>(n + 1);
    const auto it = std::upper_bound(first, last, u);
    return static_cast<std::size_t>(it - values_.begin()) - 1;
}

KnotVector clamped_uniform_knots(std::size_t num_basis, int degree) {
    if (degree < 0) throw InvalidConfiguration("degree must be non-negative");
    const auto p1 = static_cast<std::size_t>(degree) + 1;
    if (num_basis < p1) {
        throw InvalidConfiguration("need at least degree+1 = " + std::to_string(p1) +
                                   " basis functions, got " + std::to_string(num_basis));
    }
    const std::size_t interior = num_basis - p1;
    std::vector<double> values(p1, 0.0);
    for (std::size_t k = 1; k <= interior; ++k) {
        values.push_back(static_cast<double>(k) / static_cast<double>(interior + 1));
    }
    values.insert(values.end(), p1, 1.0);
    return KnotVector(std::move(values), degree);
}

std::vector<BasisValue> eval_basis(const KnotVector& knots, double u) {
    u = checked_param(u, "basis");
    const std::size_t s = knots.find_span(u);
    const int p = knots.degree();
    const auto table = basis_table(knots, s, u);
    std::vector<BasisValue> out;
    out.reserve(static_cast<std::size_t>(p) + 1);
    for (int j = 0; j <= p; ++j) {
        out.push_back({s - static_cast<std::size_t>(p) + static_cast<std::size_t>(j), table[p][j]});
    }
    return out;
}

std::vector<BasisValue> eval_basis_derivative(const KnotVector& knots, double u, int k) {
    const int p = knots.degree();
    if (k < 0 || k > p) {
        throw DomainError("derivative order " + std::to_string(k) + " outside [0, " +
                          std::to_string(p) + "]");
    }
    if (k == 0) return eval_basis(knots, u);
    u = checked_param(u, "basis");
    const std::size_t s = knots.find_span(u);
    const DerivativeRecursion ders(knots, s, u);
    std::vector<BasisValue> out;
    out.reserve(static_cast<std::size_t>(p) + 1);
    for (std::size_t i = s - static_cast<std::size_t>(p); i <= s; ++i) {
        out.push_back({i, ders(i, p, k)});
    }
    return out;
}

std::vector<double> greville_points(const KnotVector& knots) {
    const int p = knots.degree();
    std::vector<double> out(knots.num_basis());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (p == 0) {
            out[i] = 0.5 * (knots[i] + knots[i + 1]);
            continue;
        }
        double sum = 0.0;
        for (int r = 1; r <= p; ++r) sum += knots[i + static_cast<std::size_t>(r)];
        out[i] = std::clamp(sum / p, 0.0, 1.0);
    }
    return out;
}

SplineSurface::SplineSurface(KnotVector knots_u, KnotVector knots_v, Eigen::MatrixXd control_net)
    : knots_u_(std::move(knots_u)), knots_v_(std::move(knots_v)), control_net_(std::move(control_net)) {
    if (static_cast<std::size_t>(control_net_.rows()) != knots_u_.num_basis() ||
        static_cast<std::size_t>(control_net_.cols()) != knots_v_.num_basis()) {
        throw InvalidConfiguration("control net is " + std::to_string(control_net_.rows()) + "x" +
                                   std::to_string(control_net_.cols()) + ", knots imply " +
                                   std::to_string(knots_u_.num_basis()) + "x" +
                                   std::to_string(knots_v_.num_basis()));
    }
    if (!control_net_.allFinite()) throw InvalidConfiguration("control net has non-finite entries");
}

void check_derivative_order(DerivativeOrder order, int degree_u, int degree_v) {
    if (order.k < 0 || order.l < 0 || order.k > degree_u || order.l > degree_v) {
        throw DomainError("derivative order (" + std::to_string(order.k) + "," +
                          std::to_string(order.l) + ") exceeds degrees (" +
                          std::to_string(degree_u) + "," + std::to_string(degree_v) + ")");
    }
}

double eval_surface_derivative(const SplineSurface& surface, double u, double v,
                               DerivativeOrder order) {
    check_derivative_order(order, surface.degree_u(), surface.degree_v());
    const auto bu = eval_basis_derivative(surface.knots_u(), u, order.k);
    const auto bv = eval_basis_derivative(surface.knots_v(), v, order.l);
    const auto& net = surface.control_net();
    double sum = 0.0;
    for (const auto& [i, ni] : bu) {
        double row = 0.0;
        for (const auto& [j, nj] : bv) {
            row += nj * net(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        sum += ni * row;
    }
    return sum;
}

double eval_surface(const SplineSurface& surface, double u, double v) {
    return eval_surface_derivative(surface, u, v, {0, 0});
}

}  // namespace evermap
