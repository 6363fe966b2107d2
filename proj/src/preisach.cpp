#include "evermap/preisach.hpp"

#include <cmath>
#include <string>

#include "evermap/errors.hpp"

namespace evermap {

namespace {

bool top_is_minimum(const PreisachState& s) { return s.reversals.size() % 2 == 1; }

}  // namespace

bool PreisachState::is_nested() const {
    if (reversals.empty()) return false;
    for (std::size_t k = 1; k < reversals.size(); ++k) {
        const double prev = reversals[k - 1].b;
        const double cur = reversals[k].b;
        // Odd entries are maxima above the previous minimum, even entries minima below.
        if (k % 2 == 1 ? !(cur > prev) : !(cur < prev)) return false;
        if (k >= 2) {
            const double before = reversals[k - 2].b;
            if (k % 2 == 1 ? !(cur < before) : !(cur > before)) return false;
        }
    }
    return true;
}

PreisachState init_state(const EverettMap& map, InitialState initial) {
    const double bound = map.input_bound();
    const double hs = map.h_sat();
    PreisachState s;
    s.reversals.push_back({-bound, -hs});
    switch (initial.kind) {
        case InitialState::Kind::negative_saturation:
            s.current_b = -bound;
            s.current_h = -hs;
            break;
        case InitialState::Kind::positive_saturation:
            s.reversals.push_back({bound, hs});
            s.current_b = bound;
            s.current_h = hs;
            break;
        case InitialState::Kind::demagnetized: {
            if (initial.steps < 2) {
                throw InvalidConfiguration("demagnetizing staircase needs at least 2 steps");
            }
            s.reversals.push_back({bound, hs});
            s.current_b = bound;
            s.current_h = hs;
            const double n = initial.steps;
            for (int k = 1; k <= initial.steps; ++k) {
                const double amplitude = bound * (1.0 - k / n);
                step(s, map, (k % 2 == 1 ? -1.0 : 1.0) * amplitude);
            }
            break;
        }
    }
    s.direction = Direction::undefined;
    return s;
}

double step(PreisachState& s, const EverettMap& map, double b_next) {
    const double bound = map.input_bound();
    if (!std::isfinite(b_next) || std::abs(b_next) > bound * (1.0 + 1e-12)) {
        throw DomainError("input " + std::to_string(b_next * map.b_norm()) +
                          " T outside the identified range +-" + std::to_string(map.b_sat()) + " T");
    }
    b_next = std::clamp(b_next, -bound, bound);
    auto& stack = s.reversals;
    if (b_next > s.current_b) {
        if (!top_is_minimum(s)) stack.push_back({s.current_b, s.current_h});
        // Wipe out maxima dominated by the new input together with the minimum above them.
        while (stack.size() >= 3 && b_next >= stack[stack.size() - 2].b) {
            stack.pop_back();
            stack.pop_back();
        }
        const Reversal& m = stack.back();
        s.current_h = m.h + 2.0 * map.query_xi(m.b, b_next);
        s.direction = Direction::ascending;
    } else if (b_next < s.current_b) {
        if (top_is_minimum(s) && s.current_b > stack.back().b) stack.push_back({s.current_b, s.current_h});
        while (stack.size() >= 2 && !top_is_minimum(s) && b_next <= stack[stack.size() - 2].b) {
            stack.pop_back();                           // maximum
            if (stack.size() > 1) stack.pop_back();     // minimum, unless it is the anchor
        }
        if (top_is_minimum(s)) {
            // Back at the negative saturation anchor.
            s.current_h = stack.front().h;
        } else {
            const Reversal& m = stack.back();
            s.current_h = m.h - 2.0 * map.query_xi(b_next, m.b);
        }
        s.direction = Direction::descending;
    }
    s.current_b = b_next;
    return s.current_h;
}

Waveform::Waveform(std::vector<WaveSample> samples) : samples_(std::move(samples)) {
    for (std::size_t k = 0; k < samples_.size(); ++k) {
        if (!std::isfinite(samples_[k].t) || !std::isfinite(samples_[k].b)) {
            throw InvalidData("waveform sample " + std::to_string(k) + " is not finite");
        }
        if (k > 0 && !(samples_[k].t > samples_[k - 1].t)) {
            throw InvalidData("waveform time is not strictly increasing at sample " + std::to_string(k));
        }
    }
}

Waveform Waveform::from_values(std::span<const double> b, double dt) {
    std::vector<WaveSample> out;
    out.reserve(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) out.push_back({static_cast<double>(k) * dt, b[k]});
    return Waveform(std::move(out));
}

std::vector<OutputSample> simulate(const EverettMap& map, const Waveform& waveform,
                                   InitialState initial) {
    PreisachState state = init_state(map, initial);
    std::vector<OutputSample> out;
    out.reserve(waveform.size());
    std::size_t index = 0;
    for (const auto& [t, b] : waveform.samples()) {
        double h = 0.0;
        try {
            h = step(state, map, b / map.b_norm());
        } catch (const DomainError& e) {
            throw DomainError("waveform sample " + std::to_string(index) + ": " + e.what());
        }
        out.push_back({t, b, h});
        ++index;
    }
    return out;
}

}  // namespace evermap
