#include "evermap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "evermap/errors.hpp"

namespace evermap {

namespace {

double std_normal(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Rank of frac(j * golden) among j = 0..n-1: a well-spread permutation of 0..n-1.
std::vector<long> golden_permutation(std::size_t n) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> frac(n);
    for (std::size_t j = 0; j < n; ++j) frac[j] = std::fmod(static_cast<double>(j) * phi, 1.0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] < frac[b]; });
    std::vector<long> rank(n);
    for (std::size_t k = 0; k < n; ++k) rank[order[k]] = static_cast<long>(k);
    return rank;
}

void check_input(double b) {
    if (!std::isfinite(b) || std::abs(b) > 1.0 + 1e-12) {
        throw DomainError("relay input " + std::to_string(b) + " outside [-1, 1]");
    }
}

}  // namespace

double AnalyticDistribution::operator()(double alpha, double beta) const {
    if (alpha < beta) return 0.0;
    return amplitude * std_normal((alpha - center) / width) * std_normal((beta + center) / width);
}

RelayGrid::RelayGrid(const AnalyticDistribution& mu, std::size_t resolution) : resolution_(resolution) {
    if (resolution < 2) throw InvalidConfiguration("relay grid resolution must be at least 2");
    if (!(mu.width > 0.0) || !(mu.amplitude > 0.0)) {
        throw InvalidConfiguration("analytic distribution needs positive width and amplitude");
    }
    const long n = static_cast<long>(resolution);
    const auto sigma = golden_permutation(resolution);
    // Coordinates are integers over 2 n^2 so the symmetric partner of every relay is
    // exactly its negated mirror image.
    const double denom = 2.0 * static_cast<double>(n) * static_cast<double>(n);
    const double cell_area = 4.0 / (static_cast<double>(n) * static_cast<double>(n));
    auto offset = [&](long k) { return 2 * sigma[static_cast<std::size_t>(k)] + 1 - n; };

    for (long i = 0; i < n; ++i) {
        const long ci = 2 * (2 * i + 1 - n) * n;  // cell center of alpha row, units 1/(2n^2)
        for (long j = 0; j <= i; ++j) {
            const long cj = 2 * (2 * j + 1 - n) * n;
            const double area = (i == j ? 0.5 : 1.0) * cell_area;
            auto push = [&](long a, long b, double w) {
                if (a < b) std::swap(a, b);
                const double alpha = static_cast<double>(a) / denom;
                const double beta = static_cast<double>(b) / denom;
                relays_.push_back({alpha, beta, w * mu(alpha, beta)});
            };
            if (i + j == n - 1) {
                push(ci + n, cj + n, 0.5 * area);
                push(ci - n, cj - n, 0.5 * area);
            } else {
                push(ci + 2 * offset(j), cj - 2 * offset(n - 1 - i), area);
            }
        }
    }
    double raw = 0.0;
    for (const auto& r : relays_) raw += r.weight;
    if (!(raw > 0.0)) throw InvalidConfiguration("analytic distribution has no mass on the grid");
    for (auto& r : relays_) r.weight /= raw;
    total_ = 0.0;
    for (const auto& r : relays_) total_ += r.weight;
    states_.assign(relays_.size(), -1);
}

void RelayGrid::reset(RelayInit init) {
    for (std::size_t k = 0; k < relays_.size(); ++k) {
        switch (init) {
            case RelayInit::negative_saturation: states_[k] = -1; break;
            case RelayInit::positive_saturation: states_[k] = 1; break;
            case RelayInit::demagnetized:
                states_[k] = relays_[k].alpha + relays_[k].beta < 0.0 ? 1 : -1;
                break;
        }
    }
}

double RelayGrid::apply(double b) {
    check_input(b);
    for (std::size_t k = 0; k < relays_.size(); ++k) {
        if (b >= relays_[k].alpha) {
            states_[k] = 1;
        } else if (b <= relays_[k].beta) {
            states_[k] = -1;
        }
    }
    return output();
}

double RelayGrid::output() const {
    double h = 0.0;
    for (std::size_t k = 0; k < relays_.size(); ++k) h += relays_[k].weight * states_[k];
    return h;
}

std::vector<double> simulate_relays(RelayGrid& grid, std::span<const double> inputs, RelayInit init) {
    grid.reset(init);
    std::vector<double> out;
    out.reserve(inputs.size());
    for (const double b : inputs) out.push_back(grid.apply(b));
    return out;
}

double everett_reference(const RelayGrid& grid, double alpha, double beta) {
    if (alpha < beta) throw DomainError("everett_reference needs alpha >= beta");
    if (alpha == beta) return 0.0;
    double sum = 0.0;
    for (const auto& r : grid.relays()) {
        if (r.beta >= beta && r.alpha <= alpha) sum += r.weight;
    }
    return sum;
}

std::vector<ConcentricLoop> generate_concentric_loops(RelayGrid& grid, std::span<const double> peaks,
                                                      std::size_t points_per_branch,
                                                      const NoiseSpec& noise, const LoopScale& scale) {
    if (points_per_branch < 2) throw InvalidConfiguration("need at least 2 points per branch");
    if (noise.sigma_h < 0.0) throw InvalidConfiguration("noise sigma must be non-negative");
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        if (!(peaks[k] > 0.0) || peaks[k] > 1.0) throw InvalidConfiguration("loop peaks must lie in (0, 1]");
        if (k > 0 && !(peaks[k] > peaks[k - 1])) throw InvalidConfiguration("loop peaks must be ascending");
    }
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto noisy = [&](double h) {
        const double value = h * scale.h_sat;
        return noise.sigma_h > 0.0 ? value + noise.sigma_h * gauss(rng) : value;
    };
    const double last = static_cast<double>(points_per_branch - 1);

    std::vector<ConcentricLoop> loops;
    for (const double a : peaks) {
        grid.reset(RelayInit::demagnetized);
        for (const double b : {a, -a, a, -a, a}) grid.apply(b);
        ConcentricLoop loop;
        loop.peak_b = a * scale.b_sat;
        for (std::size_t k = 0; k < points_per_branch; ++k) {
            const double b = k + 1 == points_per_branch ? -a : a - 2.0 * a * static_cast<double>(k) / last;
            loop.descending.push_back({b * scale.b_sat, noisy(grid.apply(b))});
        }
        for (std::size_t k = 0; k < points_per_branch; ++k) {
            const double b = k + 1 == points_per_branch ? a : -(a - 2.0 * a * static_cast<double>(k) / last);
            loop.ascending.push_back({b * scale.b_sat, noisy(grid.apply(b))});
        }
        loops.push_back(std::move(loop));
    }
    return loops;
}

std::vector<double> default_peaks(std::size_t count) {
    const double lo = 0.05 / 1.5;
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) {
        out[k] = count == 1 ? 1.0 : lo + (1.0 - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    }
    if (count) out.back() = 1.0;
    return out;
}

}  // namespace evermap
