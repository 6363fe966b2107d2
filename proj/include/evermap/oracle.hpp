#pragma once

/**
 * @file oracle.hpp
 * @brief Brute-force relay-grid Preisach model with an analytic distribution.
 *
 * Used to synthesize concentric loops and to check the spline pipeline end
 * to end. Everything here works in normalized units: inputs in [-1, 1] and
 * relay weights summing to exactly 1, so saturation output is 1.
 *
 * The half-plane is split into N x N cells. Each cell carries one relay whose
 * thresholds are stratified inside the cell (a golden-ratio permutation of
 * offsets per row and column), so no two relays share a threshold and the
 * output has no row-wise staircase. The layout is exactly symmetric under
 * (alpha, beta) -> (-beta, -alpha); cells on the anti-diagonal carry a
 * symmetric pair of half-weight relays so the demagnetized state sums to zero.
 */

#include <cstdint>
#include <span>
#include <vector>

#include "evermap/everett.hpp"

namespace evermap {

/// mu(alpha, beta) = amplitude * g((alpha - center)/width) * g((beta + center)/width)
/// on alpha >= beta, g the standard normal density.
struct AnalyticDistribution {
    double center = 0.25;
    double width = 0.18;
    double amplitude = 1.0;

    [[nodiscard]] double operator()(double alpha, double beta) const;
};

struct Relay {
    double alpha;
    double beta;
    double weight;
};

enum class RelayInit { negative_saturation, positive_saturation, demagnetized };

class RelayGrid {
public:
    RelayGrid(const AnalyticDistribution& mu, std::size_t resolution);

    [[nodiscard]] std::size_t resolution() const noexcept { return resolution_; }
    [[nodiscard]] std::span<const Relay> relays() const noexcept { return relays_; }
    [[nodiscard]] std::span<const std::int8_t> states() const noexcept { return states_; }
    [[nodiscard]] double total_weight() const noexcept { return total_; }

    void reset(RelayInit init);
    /// Drives the input to b (normalized) and returns the output.
    double apply(double b);
    [[nodiscard]] double output() const;

private:
    std::size_t resolution_;
    std::vector<Relay> relays_;
    std::vector<std::int8_t> states_;
    double total_ = 0.0;
};

/// Runs a fresh relay simulation over normalized inputs.
std::vector<double> simulate_relays(RelayGrid& grid, std::span<const double> inputs, RelayInit init);

/// Sum of relay weights in {beta_r >= beta, alpha_r <= alpha}; 0 on the diagonal.
double everett_reference(const RelayGrid& grid, double alpha, double beta);

struct NoiseSpec {
    double sigma_h = 0.0;  ///< A/m
    std::uint64_t seed = 0;
};

/// Physical scale applied to normalized oracle data.
struct LoopScale {
    double b_sat = 1.5;     ///< T
    double h_sat = 1500.0;  ///< A/m
};

/// Stabilized symmetric loops, each started from the demagnetized state and cycled
/// twice before sampling. Peaks are normalized and ascending.
std::vector<ConcentricLoop> generate_concentric_loops(RelayGrid& grid, std::span<const double> peaks,
                                                      std::size_t points_per_branch,
                                                      const NoiseSpec& noise = {},
                                                      const LoopScale& scale = {});

/// `count` peaks uniformly spaced from 0.05/1.5 to 1 (the 0.05 T .. 1.5 T measurement range).
std::vector<double> default_peaks(std::size_t count);

}  // namespace evermap
