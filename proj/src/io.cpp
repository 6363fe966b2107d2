#include "evermap/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "evermap/errors.hpp"

namespace evermap::io {

namespace {

using nlohmann::json;

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_number(const std::string& text, std::size_t line_no) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + text + "'");
    }
    return value;
}

/// Reads rows of a CSV with an exact header; returns the data rows.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_table(std::istream& in,
                                                                          const std::vector<std::string>& header) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (split(trim(line)) != header) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw ParseError("expected CSV header '" + expected + "'");
    }
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(trim(line));
        if (fields.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(fields.size()));
        }
        rows.emplace_back(line_no, std::move(fields));
    }
    return rows;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

template <typename T>
T get_field(const json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("model JSON is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("model JSON field '") + key + "': " + e.what());
    }
}

}  // namespace

void write_loops_csv(std::ostream& out, std::span<const ConcentricLoop> loops) {
    out << "loop_id,branch,b,h\n" << std::setprecision(17);
    for (std::size_t id = 0; id < loops.size(); ++id) {
        for (const auto& p : loops[id].descending) out << id << ",desc," << p.b << ',' << p.h << '\n';
        for (const auto& p : loops[id].ascending) out << id << ",asc," << p.b << ',' << p.h << '\n';
    }
}

std::vector<ConcentricLoop> read_loops_csv(std::istream& in) {
    const auto rows = read_table(in, {"loop_id", "branch", "b", "h"});
    std::vector<std::string> order;
    std::map<std::string, ConcentricLoop> by_id;
    for (const auto& [line_no, f] : rows) {
        if (f[0].empty()) throw ParseError("line " + std::to_string(line_no) + ": empty loop_id");
        auto [it, inserted] = by_id.try_emplace(f[0]);
        if (inserted) order.push_back(f[0]);
        const BhPoint p{parse_number(f[2], line_no), parse_number(f[3], line_no)};
        if (f[1] == "desc") it->second.descending.push_back(p);
        else if (f[1] == "asc") it->second.ascending.push_back(p);
        else throw ParseError("line " + std::to_string(line_no) + ": branch must be 'asc' or 'desc'");
    }
    std::vector<ConcentricLoop> loops;
    for (const auto& id : order) {
        auto loop = by_id.at(id);
        double peak = 0.0;
        for (const auto* branch : {&loop.descending, &loop.ascending}) {
            for (const auto& p : *branch) peak = std::max(peak, std::abs(p.b));
        }
        loop.peak_b = peak;
        loops.push_back(std::move(loop));
    }
    if (loops.empty()) throw ParseError("loop CSV has no data rows");
    return loops;
}

void write_waveform_csv(std::ostream& out, const Waveform& waveform) {
    out << "t,b\n" << std::setprecision(17);
    for (const auto& s : waveform.samples()) out << s.t << ',' << s.b << '\n';
}

Waveform read_waveform_csv(std::istream& in) {
    std::vector<WaveSample> samples;
    for (const auto& [line_no, f] : read_table(in, {"t", "b"})) {
        samples.push_back({parse_number(f[0], line_no), parse_number(f[1], line_no)});
    }
    return Waveform(std::move(samples));
}

void write_output_csv(std::ostream& out, std::span<const OutputSample> samples) {
    out << "t,b,h\n" << std::setprecision(17);
    for (const auto& s : samples) out << s.t << ',' << s.b << ',' << s.h << '\n';
}

std::vector<OutputSample> read_output_csv(std::istream& in) {
    std::vector<OutputSample> out;
    for (const auto& [line_no, f] : read_table(in, {"t", "b", "h"})) {
        out.push_back({parse_number(f[0], line_no), parse_number(f[1], line_no), parse_number(f[2], line_no)});
    }
    return out;
}

void write_distribution_csv(std::ostream& out, const DistributionGrid& grid) {
    out << "alpha,beta,mu\n" << std::setprecision(17);
    for (const auto& p : grid.points) out << p.alpha << ',' << p.beta << ',' << p.mu << '\n';
}

std::string model_to_json(const EverettMap& map) {
    const auto& s = map.surface();
    json j;
    j["degree_u"] = s.degree_u();
    j["degree_v"] = s.degree_v();
    j["knots_u"] = std::vector<double>(s.knots_u().values().begin(), s.knots_u().values().end());
    j["knots_v"] = std::vector<double>(s.knots_v().values().begin(), s.knots_v().values().end());
    json net = json::array();
    const auto& p = s.control_net();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < p.cols(); ++k) row.push_back(p(i, k));
        net.push_back(std::move(row));
    }
    j["control_net"] = std::move(net);
    j["b_norm"] = map.b_norm();
    j["h_norm"] = map.h_norm();
    j["b_sat"] = map.b_sat();
    j["h_sat"] = map.h_sat();
    const auto& m = map.meta();
    j["fit_meta"] = {{"tolerance", m.tolerance},
                     {"kkt_residual", m.kkt_residual},
                     {"constraint_violation", m.constraint_violation},
                     {"constrained", m.constrained}};
    return j.dump(2) + "\n";
}

EverettMap model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model JSON does not parse: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("model JSON must be an object");
    const auto knots_u = get_field<std::vector<double>>(j, "knots_u");
    const auto knots_v = get_field<std::vector<double>>(j, "knots_v");
    const auto rows = get_field<std::vector<std::vector<double>>>(j, "control_net");
    if (rows.empty()) throw ParseError("model JSON has an empty control net");
    Eigen::MatrixXd net(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw ParseError("control net rows differ in length");
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            net(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
    }
    FitMeta meta;
    if (j.contains("fit_meta")) {
        const auto& m = j.at("fit_meta");
        meta.tolerance = get_field<double>(m, "tolerance");
        meta.kkt_residual = get_field<double>(m, "kkt_residual");
        meta.constraint_violation = get_field<double>(m, "constraint_violation");
        meta.constrained = get_field<bool>(m, "constrained");
    }
    const int degree_u = get_field<int>(j, "degree_u");
    const int degree_v = get_field<int>(j, "degree_v");
    const auto b_norm = get_field<double>(j, "b_norm");
    const auto h_norm = get_field<double>(j, "h_norm");
    const auto b_sat = get_field<double>(j, "b_sat");
    const auto h_sat = get_field<double>(j, "h_sat");
    try {
        SplineSurface surface(KnotVector(knots_u, degree_u), KnotVector(knots_v, degree_v), std::move(net));
        return EverettMap(std::move(surface), b_norm, h_norm, b_sat, h_sat, meta);
    } catch (const InvalidConfiguration& e) {
        throw ParseError(std::string("model JSON is not a valid map: ") + e.what());
    }
}

void save_model(const std::string& path, const EverettMap& map) {
    auto out = open_output(path);
    out << model_to_json(map);
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

EverettMap load_model(const std::string& path) {
    auto in = open_input(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

std::vector<ConcentricLoop> load_loops(const std::string& path) {
    auto in = open_input(path);
    return read_loops_csv(in);
}

Waveform load_waveform(const std::string& path) {
    auto in = open_input(path);
    return read_waveform_csv(in);
}

}  // namespace evermap::io
