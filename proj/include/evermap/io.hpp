#pragma once

// File formats:
//   loops CSV          loop_id,branch,b,h      (branch is asc|desc, rows in branch order)
//   waveform CSV       t,b
//   output CSV         t,b,h
//   distribution CSV   alpha,beta,mu
//   model JSON         degree_u, degree_v, knots_u, knots_v, control_net (rows = i),
//                      b_norm, h_norm, b_sat, h_sat, fit_meta{...}
// Numbers are written with 17 significant digits (CSV) or the shortest
// round-trip representation (JSON), so everything reloads bit-exactly.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "evermap/everett.hpp"
#include "evermap/preisach.hpp"

namespace evermap::io {

void write_loops_csv(std::ostream& out, std::span<const ConcentricLoop> loops);
std::vector<ConcentricLoop> read_loops_csv(std::istream& in);

void write_waveform_csv(std::ostream& out, const Waveform& waveform);
Waveform read_waveform_csv(std::istream& in);

void write_output_csv(std::ostream& out, std::span<const OutputSample> samples);
std::vector<OutputSample> read_output_csv(std::istream& in);

void write_distribution_csv(std::ostream& out, const DistributionGrid& grid);

std::string model_to_json(const EverettMap& map);
EverettMap model_from_json(const std::string& text);

void save_model(const std::string& path, const EverettMap& map);
EverettMap load_model(const std::string& path);

std::vector<ConcentricLoop> load_loops(const std::string& path);
Waveform load_waveform(const std::string& path);

}  // namespace evermap::io
