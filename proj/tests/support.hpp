#pragma once

// Shared fixtures: oracle loops and maps fitted on them, built once per binary.

#include <vector>

#include "evermap/everett.hpp"
#include "evermap/oracle.hpp"

namespace fixtures {

inline evermap::RelayGrid& oracle_grid() {
    static evermap::RelayGrid grid(evermap::AnalyticDistribution{}, 200);
    return grid;
}

inline const std::vector<evermap::ConcentricLoop>& clean_loops() {
    static const auto loops =
        evermap::generate_concentric_loops(oracle_grid(), evermap::default_peaks(12), 100);
    return loops;
}

inline const std::vector<evermap::ConcentricLoop>& noisy_loops() {
    static const auto loops = evermap::generate_concentric_loops(oracle_grid(), evermap::default_peaks(12), 200,
                                                                 {0.01 * 1500.0, 7});
    return loops;
}

inline const evermap::EverettMap& clean_map() {
    static const auto map = evermap::fit_everett(clean_loops());
    return map;
}

inline const evermap::EverettMap& noisy_map() {
    static const auto map = evermap::fit_everett(noisy_loops());
    return map;
}

inline const evermap::EverettMap& noisy_unconstrained_map() {
    static const auto map = [] {
        evermap::EverettFitConfig cfg;
        cfg.constraints_enabled = false;
        return evermap::fit_everett(noisy_loops(), cfg);
    }();
    return map;
}

}  // namespace fixtures
