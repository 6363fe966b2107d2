#pragma once

// Behavioural checks of a fitted map against the relay-grid oracle and against
// the structural properties every valid Preisach map must have.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evermap/everett.hpp"
#include "evermap/oracle.hpp"
#include "evermap/preisach.hpp"
#include "evermap/signals.hpp"

namespace evermap {

struct CriterionResult {
    enum class Bound { at_most, at_least };

    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    Bound bound = Bound::at_most;
    bool pass = false;
};

CriterionResult make_criterion(std::string name, double value, double threshold,
                               CriterionResult::Bound bound = CriterionResult::Bound::at_most);

struct ValidationConfig {
    AnalyticDistribution distribution;
    std::size_t oracle_resolution = 200;
    std::uint64_t seed = 20240601;
    int random_waveforms = 20;
    int random_reversals = 10;
    double equivalence_rms = 0.01;
    double signal_rms = 0.03;
    double degauss_terminal = 0.01;
    double monotone_slack = 1e-6;
    double closure_tolerance = 1e-9;
    double constraint_tolerance = 1e-6;
};

RelayInit to_relay_init(InitialState initial);

/// Oracle response to a physical waveform: input scaled by b_sat, output by h_sat.
std::vector<double> oracle_response(RelayGrid& grid, const Waveform& waveform, InitialState initial,
                                    double b_sat, double h_sat);

/// RMS of (model - reference) divided by `scale`.
double relative_rms(std::span<const OutputSample> model, std::span<const double> reference, double scale);

/// Largest |h(close) - h(open)| over the closures, divided by `scale`.
double closure_error(std::span<const OutputSample> out,
                     std::span<const std::pair<std::size_t, std::size_t>> closures, double scale);

/// Largest step where h moves against b, divided by `scale`.
double monotone_violation(std::span<const OutputSample> out, double scale);

/// Model vs. oracle RMS over a built-in signal, relative to h_sat.
double signal_rms(const EverettMap& map, RelayGrid& grid, const Signal& signal);

/// Constraint, equivalence, FORC, degauss and PWM criteria.
std::vector<CriterionResult> validate_model(const EverettMap& map, const ValidationConfig& config = {});

}  // namespace evermap
