#include "evermap/signals.hpp"

#include <cmath>
#include <random>
#include <string>

#include "evermap/errors.hpp"

namespace evermap {

namespace {

Waveform timed(const std::vector<double>& values, double dt) {
    std::vector<WaveSample> samples;
    samples.reserve(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) samples.push_back({static_cast<double>(k) * dt, values[k]});
    return Waveform(std::move(samples));
}

void append_ramp(std::vector<double>& out, double from, double to, double max_step) {
    const double span = std::abs(to - from);
    if (span == 0.0) return;
    const auto n = static_cast<std::size_t>(std::ceil(span / max_step - 1e-9));
    for (std::size_t k = 1; k < n; ++k) out.push_back(from + (to - from) * static_cast<double>(k) / static_cast<double>(n));
    out.push_back(to);
}

void check_amplitude(double amplitude) {
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw InvalidConfiguration("signal amplitude must be positive");
}

}  // namespace

std::vector<double> ramp_through(const std::vector<double>& turning_points, double max_step) {
    if (!(max_step > 0.0)) throw InvalidConfiguration("ramp step must be positive");
    std::vector<double> out;
    if (turning_points.empty()) return out;
    out.push_back(turning_points.front());
    for (std::size_t k = 1; k < turning_points.size(); ++k) {
        append_ramp(out, turning_points[k - 1], turning_points[k], max_step);
    }
    return out;
}

Signal degauss_signal(double amplitude, int half_cycles, const SignalTiming& timing) {
    check_amplitude(amplitude);
    if (half_cycles < 1) throw InvalidConfiguration("degauss needs at least one half-cycle");
    std::vector<double> turns;
    for (int k = 0; k <= half_cycles; ++k) {
        const double level = amplitude * (1.0 - static_cast<double>(k) / half_cycles);
        turns.push_back(k % 2 == 0 ? level : -level);
    }
    turns.back() = 0.0;
    return {timed(ramp_through(turns, timing.max_step * amplitude), timing.dt), {}, InitialState::positive()};
}

Signal forc_signal(double amplitude, int levels, const SignalTiming& timing) {
    check_amplitude(amplitude);
    if (levels < 1) throw InvalidConfiguration("FORC signal needs at least one reversal level");
    std::vector<double> turns{amplitude};
    for (int k = 1; k <= levels; ++k) {
        turns.push_back(amplitude * (1.0 - 2.0 * k / levels));
        turns.push_back(amplitude);
    }
    return {timed(ramp_through(turns, timing.max_step * amplitude), timing.dt), {}, InitialState::positive()};
}

Signal arbitrary_signal(double amplitude, const SignalTiming& timing) {
    check_amplitude(amplitude);
    const std::vector<double> script{1.0, -0.8, 0.6, -0.45, 0.3, -0.2, 0.45, -0.1, 0.9,
                                     -0.3, 0.1, -0.95, 0.5, 0.05, 0.7, -1.0, 1.0};
    std::vector<double> turns;
    for (const double s : script) turns.push_back(s * amplitude);
    return {timed(ramp_through(turns, timing.max_step * amplitude), timing.dt), {}, InitialState::positive()};
}

Signal pwm_signal(double amplitude, const PwmParams& params, const SignalTiming& timing) {
    check_amplitude(amplitude);
    const int k_per = params.carriers_per_period;
    if (k_per < 4 || k_per % 4 != 0) throw InvalidConfiguration("carriers per period must be a positive multiple of 4");
    if (params.periods < 1) throw InvalidConfiguration("PWM signal needs at least one period");
    const double a_f = params.fundamental * amplitude;
    const double increment = 4.0 * a_f / k_per;
    const double depth = params.depth * amplitude;
    if (!(depth > 0.0) || depth >= increment) {
        throw InvalidConfiguration("minor-loop depth must be positive and below the fundamental increment " +
                                   std::to_string(increment / amplitude));
    }
    if (a_f + depth > amplitude * (1.0 + 1e-12)) throw InvalidConfiguration("PWM excursions exceed the amplitude");

    // Triangle fundamental sampled at carrier instants: 0 -> a_f -> -a_f -> 0.
    std::vector<double> levels;
    const int total = k_per * params.periods;
    for (int k = 0; k <= total; ++k) {
        const int phase = k % k_per;
        const int quarter = k_per / 4;
        double level;
        if (phase <= quarter) level = increment * phase;
        else if (phase <= 3 * quarter) level = a_f - increment * (phase - quarter);
        else level = -a_f + increment * (phase - 3 * quarter);
        levels.push_back(level);
    }

    const double step = timing.max_step * amplitude;
    std::vector<double> values{levels.front()};
    Signal sig;
    for (std::size_t k = 1; k < levels.size(); ++k) {
        append_ramp(values, levels[k - 1], levels[k], step);
        const double arrival = levels[k] > levels[k - 1] ? 1.0 : -1.0;
        const std::size_t open = values.size() - 1;
        append_ramp(values, levels[k], levels[k] - arrival * depth, step);
        append_ramp(values, levels[k] - arrival * depth, levels[k], step);
        sig.closures.emplace_back(open, values.size() - 1);
    }
    sig.waveform = timed(values, timing.dt);
    sig.initial = InitialState::demagnetized();
    return sig;
}

Signal random_signal(double amplitude, std::uint64_t seed, int reversals, const SignalTiming& timing) {
    check_amplitude(amplitude);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    std::vector<double> turns{-amplitude};
    for (int k = 0; k < reversals; ++k) turns.push_back(amplitude * uniform(rng));
    return {timed(ramp_through(turns, timing.max_step * amplitude), timing.dt), {}, InitialState::negative()};
}

}  // namespace evermap
