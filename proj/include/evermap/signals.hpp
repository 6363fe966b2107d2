#pragma once

// Built-in excitations: piecewise-linear B(t) through a list of turning points.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "evermap/preisach.hpp"

namespace evermap {

struct Signal {
    Waveform waveform;
    /// (opening, closing) sample indices of closed minor loops: the input leaves a level,
    /// reverses, and returns to exactly that level.
    std::vector<std::pair<std::size_t, std::size_t>> closures;
    InitialState initial;
};

struct SignalTiming {
    double max_step = 0.01;  ///< largest B change between samples, as a fraction of the amplitude
    double dt = 1e-4;        ///< s between samples
};

/// B values along linear ramps through `turning_points`; the first point is the first sample.
std::vector<double> ramp_through(const std::vector<double>& turning_points, double max_step);

/// Alternating sweep decaying linearly from +amplitude to 0 over `half_cycles` half-cycles.
Signal degauss_signal(double amplitude, int half_cycles = 40, const SignalTiming& timing = {});

/// From +amplitude, reverse at `levels` uniformly spaced levels down to -amplitude and
/// return to +amplitude after each.
Signal forc_signal(double amplitude, int levels = 10, const SignalTiming& timing = {});

/// Nested reversal script with higher-order reversal curves.
Signal arbitrary_signal(double amplitude, const SignalTiming& timing = {});

struct PwmParams {
    double fundamental = 0.8;   ///< fundamental amplitude, fraction of the amplitude argument
    int carriers_per_period = 20;  ///< multiple of 4
    int periods = 2;
    double depth = 0.1;         ///< minor-loop depth, fraction of the amplitude argument
};

/// Triangular fundamental sweep with one closed minor loop per carrier period.
Signal pwm_signal(double amplitude, const PwmParams& params = {}, const SignalTiming& timing = {});

/// Starts at -amplitude and ramps through `reversals` uniformly random turning points.
Signal random_signal(double amplitude, std::uint64_t seed, int reversals = 10,
                     const SignalTiming& timing = {});

}  // namespace evermap
