#include "evermap/validation.hpp"

#include <algorithm>
#include <cmath>

namespace evermap {

CriterionResult make_criterion(std::string name, double value, double threshold, CriterionResult::Bound bound) {
    const bool pass = std::isfinite(value) &&
                      (bound == CriterionResult::Bound::at_most ? value <= threshold : value >= threshold);
    return {std::move(name), value, threshold, bound, pass};
}

RelayInit to_relay_init(InitialState initial) {
    switch (initial.kind) {
        case InitialState::Kind::negative_saturation: return RelayInit::negative_saturation;
        case InitialState::Kind::positive_saturation: return RelayInit::positive_saturation;
        case InitialState::Kind::demagnetized: return RelayInit::demagnetized;
    }
    return RelayInit::negative_saturation;
}

std::vector<double> oracle_response(RelayGrid& grid, const Waveform& waveform, InitialState initial, double b_sat,
                                    double h_sat) {
    std::vector<double> inputs;
    inputs.reserve(waveform.size());
    for (const auto& s : waveform.samples()) inputs.push_back(s.b / b_sat);
    auto out = simulate_relays(grid, inputs, to_relay_init(initial));
    for (auto& h : out) h *= h_sat;
    return out;
}

double relative_rms(std::span<const OutputSample> model, std::span<const double> reference, double scale) {
    if (model.empty() || model.size() != reference.size()) return std::nan("");
    double sum = 0.0;
    for (std::size_t k = 0; k < model.size(); ++k) {
        const double d = model[k].h - reference[k];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(model.size())) / scale;
}

double closure_error(std::span<const OutputSample> out,
                     std::span<const std::pair<std::size_t, std::size_t>> closures, double scale) {
    double worst = 0.0;
    for (const auto& [open, close] : closures) {
        worst = std::max(worst, std::abs(out[close].h - out[open].h));
    }
    return worst / scale;
}

double monotone_violation(std::span<const OutputSample> out, double scale) {
    double worst = 0.0;
    for (std::size_t k = 1; k < out.size(); ++k) {
        const double db = out[k].b - out[k - 1].b;
        const double dh = out[k].h - out[k - 1].h;
        if (db > 0.0) worst = std::max(worst, -dh);
        if (db < 0.0) worst = std::max(worst, dh);
        if (db == 0.0) worst = std::max(worst, std::abs(dh));
    }
    return worst / scale;
}

double signal_rms(const EverettMap& map, RelayGrid& grid, const Signal& signal) {
    const auto model = simulate(map, signal.waveform, signal.initial);
    const auto reference = oracle_response(grid, signal.waveform, signal.initial, map.b_sat(), map.h_sat());
    return relative_rms(model, reference, map.h_sat());
}

std::vector<CriterionResult> validate_model(const EverettMap& map, const ValidationConfig& config) {
    using Bound = CriterionResult::Bound;
    std::vector<CriterionResult> results;
    const double h_sat = map.h_sat();
    const double b_sat = map.b_sat();

    const auto check = check_constraints(map);
    const double mu_floor = check.max_mu > 0.0 ? check.min_mu / check.max_mu : check.min_mu;
    results.push_back(make_criterion("non-negative distribution (min mu / max mu)", mu_floor,
                                     -config.constraint_tolerance, Bound::at_least));
    results.push_back(make_criterion("zero diagonal (max |xi(x,x)| / h_sat)", check.diagonal_max_abs / h_sat,
                                     config.constraint_tolerance));
    results.push_back(make_criterion("saturation peak (|xi(-b_sat,b_sat) - h_sat| / h_sat)",
                                     check.peak_error / h_sat, config.constraint_tolerance));

    RelayGrid grid(config.distribution, config.oracle_resolution);

    double worst_random = 0.0;
    for (int k = 0; k < config.random_waveforms; ++k) {
        const auto signal = random_signal(b_sat, config.seed + static_cast<std::uint64_t>(k), config.random_reversals);
        worst_random = std::max(worst_random, signal_rms(map, grid, signal));
    }
    results.push_back(make_criterion("oracle equivalence, random waveforms (worst RMS / h_sat)", worst_random,
                                     config.equivalence_rms));

    results.push_back(make_criterion("FORC vs oracle (RMS / h_sat)", signal_rms(map, grid, forc_signal(b_sat)),
                                     config.signal_rms));

    const auto degauss = degauss_signal(b_sat);
    const auto degauss_out = simulate(map, degauss.waveform, degauss.initial);
    results.push_back(make_criterion("degauss terminal (|h_end| / h_sat)", std::abs(degauss_out.back().h) / h_sat,
                                     config.degauss_terminal));
    results.push_back(make_criterion("degauss branch monotonicity (violation / h_sat)",
                                     monotone_violation(degauss_out, h_sat), config.monotone_slack));

    const auto pwm = pwm_signal(b_sat);
    const auto pwm_out = simulate(map, pwm.waveform, pwm.initial);
    results.push_back(make_criterion("PWM minor-loop closure (max |dh| / h_sat)",
                                     closure_error(pwm_out, pwm.closures, h_sat), config.closure_tolerance));
    results.push_back(make_criterion("PWM vs oracle (RMS / h_sat)", signal_rms(map, grid, pwm), config.signal_rms));
    return results;
}

}  // namespace evermap
