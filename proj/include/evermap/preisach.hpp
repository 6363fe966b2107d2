#pragma once

// Scalar classical Preisach model driven by B, evaluated through an Everett map.
//
// The memory is a stack of reversal points (normalized input, output H). Even
// positions hold minima, odd positions maxima; position 0 is the negative
// saturation anchor and is never removed. The top entry is the start of the
// branch currently being traversed. Ascending from the exposed minimum m:
//     h = h_m + 2 xi(m, b)
// descending from the exposed maximum M:
//     h = h_M - 2 xi(b, M)

#include <cstddef>
#include <span>
#include <vector>

#include "evermap/everett.hpp"

namespace evermap {

enum class Direction { undefined, ascending, descending };

struct Reversal {
    double b;  ///< normalized input
    double h;  ///< A/m
};

struct PreisachState {
    std::vector<Reversal> reversals;
    double current_b = 0.0;  ///< normalized
    double current_h = 0.0;  ///< A/m
    Direction direction = Direction::undefined;

    /// Minima strictly increasing, maxima strictly decreasing, each reversal inside the
    /// interval spanned by the previous two.
    [[nodiscard]] bool is_nested() const;
};

struct InitialState {
    enum class Kind { negative_saturation, positive_saturation, demagnetized };
    Kind kind = Kind::negative_saturation;
    int steps = 64;  ///< staircase length for the demagnetized state

    static InitialState negative() { return {Kind::negative_saturation, 64}; }
    static InitialState positive() { return {Kind::positive_saturation, 64}; }
    static InitialState demagnetized(int steps = 64) { return {Kind::demagnetized, steps}; }
};

PreisachState init_state(const EverettMap& map, InitialState initial);

/// Moves the input to b_next (normalized) and returns the new H (A/m).
double step(PreisachState& state, const EverettMap& map, double b_next);

struct WaveSample {
    double t;  ///< s
    double b;  ///< T
};

/// Time-stamped B samples; t strictly increasing.
class Waveform {
public:
    Waveform() = default;
    explicit Waveform(std::vector<WaveSample> samples);

    [[nodiscard]] std::span<const WaveSample> samples() const noexcept { return samples_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }

    /// Builds a waveform from B values at unit time spacing.
    static Waveform from_values(std::span<const double> b, double dt = 1.0);

private:
    std::vector<WaveSample> samples_;
};

struct OutputSample {
    double t;
    double b;
    double h;
};

/// Steps the model through every sample. Throws DomainError naming the sample index
/// when |b| exceeds b_sat.
std::vector<OutputSample> simulate(const EverettMap& map, const Waveform& waveform,
                                   InitialState initial);

}  // namespace evermap
