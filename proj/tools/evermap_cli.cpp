// evermap: synthesize loops, fit Everett maps, simulate excitations, export and validate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "evermap/errors.hpp"
#include "evermap/everett.hpp"
#include "evermap/io.hpp"
#include "evermap/oracle.hpp"
#include "evermap/preisach.hpp"
#include "evermap/signals.hpp"
#include "evermap/validation.hpp"

namespace fs = std::filesystem;
using namespace evermap;

namespace {

constexpr const char* kOutDirEnv = "EVERMAP_OUTPUT_DIR";

std::string default_out_dir() {
    const char* env = std::getenv(kOutDirEnv);
    return (env != nullptr && *env != '\0') ? std::string(env) : std::string(".");
}

/// Explicit path if given, else <output dir>/<name>.
std::string resolve_output(const std::string& explicit_path, const std::string& out_dir, const std::string& name) {
    if (!explicit_path.empty()) return explicit_path;
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

struct GenerateOptions {
    std::size_t peaks = 12;
    std::size_t points = 100;
    double noise = 0.0;
    std::optional<std::uint64_t> seed;
    std::size_t resolution = 200;
    double b_sat = 1.5;
    double h_sat = 1500.0;
    std::string output;
};

int run_generate(const GenerateOptions& o, const std::string& out_dir) {
    if (o.noise > 0.0 && !o.seed) throw InvalidConfiguration("--seed is required when --noise is non-zero");
    if (o.peaks < 3) throw InvalidConfiguration("--peaks must be at least 3");
    RelayGrid grid(AnalyticDistribution{}, o.resolution);
    const auto peaks = default_peaks(o.peaks);
    const auto loops = generate_concentric_loops(grid, peaks, o.points, {o.noise * o.h_sat, o.seed.value_or(0)},
                                                 {o.b_sat, o.h_sat});
    const auto path = resolve_output(o.output, out_dir, "loops.csv");
    auto out = open_for_write(path);
    io::write_loops_csv(out, loops);
    std::cout << "wrote " << loops.size() << " loops to " << path << "\n"
              << "  peaks: " << loops.front().peak_b << " T .. " << loops.back().peak_b << " T\n"
              << "  h_sat: " << o.h_sat << " A/m\n"
              << "  noise: sigma = " << o.noise * o.h_sat << " A/m";
    if (o.seed) std::cout << " (seed " << *o.seed << ")";
    std::cout << "\n";
    return 0;
}

struct FitOptions {
    std::string loops;
    EverettFitConfig config;
    bool unconstrained = false;
    std::string output;
};

int run_fit(FitOptions o, const std::string& out_dir) {
    o.config.constraints_enabled = !o.unconstrained;
    const auto loops = io::load_loops(o.loops);
    EverettMap map = [&] {
        try {
            return fit_everett(loops, o.config);
        } catch (const FitFailure& e) {
            std::cerr << "fit failed: " << e.what() << "\n"
                      << "  status: " << to_string(e.status) << "\n"
                      << "  iterations: " << e.iterations << "\n"
                      << "  KKT residual: " << e.kkt_residual << "\n"
                      << "  constraint violation: " << e.constraint_violation << "\n";
            throw;
        }
    }();
    const auto path = resolve_output(o.output, out_dir, "model.json");
    io::save_model(path, map);

    const auto& m = map.meta();
    const auto c = check_constraints(map);
    const double tol = 1e-6;
    const double floor = c.max_mu > 0.0 ? c.min_mu / c.max_mu : c.min_mu;
    std::cout << "wrote model to " << path << "\n"
              << "  net: " << o.config.control_points << "x" << o.config.control_points << ", degree "
              << o.config.degree << ", " << (m.constrained ? "constrained" : "unconstrained") << "\n"
              << "  samples: " << m.samples << ", inequality rows: " << m.inequality_rows
              << ", equality rows: " << m.equality_rows << "\n"
              << "  iterations: " << m.iterations << "\n"
              << "  KKT residual: " << m.kkt_residual << "\n"
              << "  max constraint violation: " << m.constraint_violation << "\n"
              << "  mu range: [" << c.min_mu << ", " << c.max_mu << "]\n"
              << "  diagonal max |xi|: " << c.diagonal_max_abs << " A/m\n"
              << "  peak error: " << c.peak_error << " A/m\n"
              << verdict(floor >= -tol) << "  constraint 1: min mu >= -1e-6 max mu\n"
              << verdict(c.diagonal_max_abs <= tol * map.h_sat()) << "  constraint 2: xi = 0 on the diagonal\n"
              << verdict(c.peak_error <= tol * map.h_sat()) << "  constraint 3: xi(-b_sat, b_sat) = h_sat\n";
    return 0;
}

struct SimulateOptions {
    std::string model;
    std::string input;
    std::string signal;
    std::optional<double> amplitude;
    std::string initial;
    int half_cycles = 40;
    int levels = 10;
    PwmParams pwm;
    SignalTiming timing;
    std::string output;
};

InitialState parse_initial(const std::string& name) {
    if (name == "negative") return InitialState::negative();
    if (name == "positive") return InitialState::positive();
    if (name == "demagnetized") return InitialState::demagnetized();
    throw InvalidConfiguration("unknown initial state '" + name + "'");
}

int run_simulate(const SimulateOptions& o, const std::string& out_dir) {
    const auto map = io::load_model(o.model);
    Signal sig;
    if (!o.input.empty()) {
        sig.waveform = io::load_waveform(o.input);
        sig.initial = InitialState::negative();
    } else {
        const double amplitude = o.amplitude.value_or(map.b_sat());
        if (o.signal == "degauss") sig = degauss_signal(amplitude, o.half_cycles, o.timing);
        else if (o.signal == "forc") sig = forc_signal(amplitude, o.levels, o.timing);
        else if (o.signal == "arbitrary") sig = arbitrary_signal(amplitude, o.timing);
        else if (o.signal == "pwm") sig = pwm_signal(amplitude, o.pwm, o.timing);
    }
    if (!o.initial.empty()) sig.initial = parse_initial(o.initial);

    const auto out = simulate(map, sig.waveform, sig.initial);
    const auto path = resolve_output(o.output, out_dir, "simulation.csv");
    auto file = open_for_write(path);
    io::write_output_csv(file, out);
    std::cout << "wrote " << out.size() << " samples to " << path << "\n";
    if (!out.empty()) {
        std::cout << "  terminal: b = " << out.back().b << " T, h = " << out.back().h << " A/m ("
                  << 100.0 * std::abs(out.back().h) / map.h_sat() << "% of h_sat)\n";
    }
    if (!sig.closures.empty()) {
        std::cout << "  closed minor loops: " << sig.closures.size()
                  << ", max return error: " << closure_error(out, sig.closures, 1.0) << " A/m\n";
    }
    return 0;
}

int run_distribution(const std::string& model, std::size_t resolution, const std::string& output,
                     const std::string& out_dir) {
    const auto map = io::load_model(model);
    const auto grid = distribution(map, resolution);
    const auto path = resolve_output(output, out_dir, "distribution.csv");
    auto file = open_for_write(path);
    io::write_distribution_csv(file, grid);
    std::cout << "wrote " << grid.points.size() << " points to " << path << "\n"
              << "  mu range: [" << grid.min_mu() << ", " << grid.max_mu() << "]\n"
              << "  integral: " << grid.integral() << " A/m (h_sat " << map.h_sat() << ")\n";
    return 0;
}

int run_validate(const std::string& model, const ValidationConfig& config) {
    const auto map = io::load_model(model);
    const auto results = validate_model(map, config);
    bool all = true;
    std::cout << std::left << std::setw(60) << "metric" << std::right << std::setw(14) << "value"
              << std::setw(16) << "threshold" << "  result\n";
    for (const auto& r : results) {
        const char* rel = r.bound == CriterionResult::Bound::at_most ? "<= " : ">= ";
        std::ostringstream threshold;
        threshold << rel << std::setprecision(3) << r.threshold;
        std::cout << std::left << std::setw(60) << r.name << std::right << std::setw(14) << std::setprecision(4)
                  << r.value << std::setw(16) << threshold.str() << "  " << verdict(r.pass) << "\n";
        all = all && r.pass;
    }
    std::cout << (all ? "all criteria pass" : "some criteria fail") << "\n";
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained B-spline Everett maps for Preisach hysteresis simulation"};
    app.require_subcommand(1);
    std::string out_dir = default_out_dir();
    app.add_option("--out-dir", out_dir,
                   std::string("Directory for outputs without an explicit path (env ") + kOutDirEnv + ")")
        ->capture_default_str();

    GenerateOptions gen;
    auto* generate = app.add_subcommand("generate-loops", "Write concentric B-H loops from the relay-grid oracle");
    generate->add_option("--peaks", gen.peaks, "Number of loops (peaks 0.05 T .. b_sat)")->capture_default_str();
    generate->add_option("--points", gen.points, "Samples per branch")->capture_default_str()->check(CLI::Range(2, 100000));
    generate->add_option("--noise", gen.noise, "Gaussian H noise sigma as a fraction of h_sat")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    generate->add_option("--seed", gen.seed, "Noise seed (required with --noise > 0)");
    generate->add_option("--resolution", gen.resolution, "Oracle relay grid size N")
        ->capture_default_str()
        ->check(CLI::Range(2, 5000));
    generate->add_option("--b-sat", gen.b_sat, "Saturation B (T)")->capture_default_str()->check(CLI::PositiveNumber);
    generate->add_option("--h-sat", gen.h_sat, "Saturation H (A/m)")->capture_default_str()->check(CLI::PositiveNumber);
    generate->add_option("-o,--output", gen.output, "Output loop CSV (default <out-dir>/loops.csv)");

    FitOptions fit;
    auto* fitcmd = app.add_subcommand("fit", "Fit a constrained Everett map to a loop CSV");
    fitcmd->add_option("loops", fit.loops, "Loop CSV (loop_id,branch,b,h)")->required()->check(CLI::ExistingFile);
    fitcmd->add_option("--control-points", fit.config.control_points, "Control points per axis")
        ->capture_default_str()
        ->check(CLI::Range(2, 200));
    fitcmd->add_option("--degree", fit.config.degree, "Spline degree in both directions")
        ->capture_default_str()
        ->check(CLI::Range(1, 10));
    const std::map<std::string, PositivityRows> positivity{{"bernstein", PositivityRows::bernstein},
                                                           {"control-net", PositivityRows::control_net},
                                                           {"collocation", PositivityRows::collocation}};
    fitcmd->add_option("--positivity", fit.config.positivity, "How mu >= 0 is imposed")
        ->transform(CLI::CheckedTransformer(positivity))
        ->default_str("bernstein");
    fitcmd->add_option("--subdivision", fit.config.subdivision, "bernstein: sub-cells per knot interval and axis")
        ->capture_default_str()
        ->check(CLI::Range(1, 16));
    fitcmd->add_option("--slope-penalty", fit.config.slope_penalty,
                       "Weight per sample of the squared diagonal slope of xi")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    fitcmd->add_option("--density", fit.config.collocation_density,
                       "collocation: points per Greville interval")
        ->capture_default_str()
        ->check(CLI::Range(1, 20));
    fitcmd->add_option("--tolerance", fit.config.tolerance, "QP feasibility / KKT tolerance")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    fitcmd->add_option("--max-iterations", fit.config.max_iterations, "QP iteration cap (0 = automatic)")
        ->capture_default_str();
    fitcmd->add_flag("--unconstrained", fit.unconstrained, "Plain least squares without shape constraints");
    fitcmd->add_option("-o,--output", fit.output, "Output model JSON (default <out-dir>/model.json)");

    SimulateOptions sim;
    auto* simcmd = app.add_subcommand("simulate", "Run the Preisach model on a waveform");
    simcmd->add_option("model", sim.model, "Model JSON")->required()->check(CLI::ExistingFile);
    auto* input_opt = simcmd->add_option("--input", sim.input, "Waveform CSV (t,b)")->check(CLI::ExistingFile);
    auto* signal_opt = simcmd->add_option("--signal", sim.signal, "Built-in excitation")
                           ->check(CLI::IsMember({"degauss", "forc", "arbitrary", "pwm"}));
    input_opt->excludes(signal_opt);
    simcmd->add_option("--amplitude", sim.amplitude, "Signal amplitude in T (default b_sat)")
        ->check(CLI::PositiveNumber);
    simcmd->add_option("--initial", sim.initial,
                       "Initial state (default: negative for files; positive for degauss, forc, arbitrary; "
                       "demagnetized for pwm)")
        ->check(CLI::IsMember({"negative", "positive", "demagnetized"}));
    simcmd->add_option("--half-cycles", sim.half_cycles, "degauss: number of half-cycles")->capture_default_str();
    simcmd->add_option("--levels", sim.levels, "forc: number of reversal levels")->capture_default_str();
    simcmd->add_option("--fundamental", sim.pwm.fundamental, "pwm: fundamental amplitude / amplitude")
        ->capture_default_str();
    simcmd->add_option("--carriers", sim.pwm.carriers_per_period, "pwm: carrier periods per fundamental period")
        ->capture_default_str();
    simcmd->add_option("--periods", sim.pwm.periods, "pwm: fundamental periods")->capture_default_str();
    simcmd->add_option("--depth", sim.pwm.depth, "pwm: minor-loop depth / amplitude")->capture_default_str();
    simcmd->add_option("--max-step", sim.timing.max_step, "Largest B step between samples / amplitude")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    simcmd->add_option("--dt", sim.timing.dt, "Sample spacing (s)")->capture_default_str()->check(CLI::PositiveNumber);
    simcmd->add_option("-o,--output", sim.output, "Output CSV t,b,h (default <out-dir>/simulation.csv)");

    std::string dist_model;
    std::string dist_output;
    std::size_t dist_resolution = 100;
    auto* distcmd = app.add_subcommand("distribution", "Export mu(alpha, beta) on the half-plane grid");
    distcmd->add_option("model", dist_model, "Model JSON")->required()->check(CLI::ExistingFile);
    distcmd->add_option("--resolution", dist_resolution, "Grid points per axis")
        ->capture_default_str()
        ->check(CLI::Range(2, 5000));
    distcmd->add_option("-o,--output", dist_output, "Output CSV alpha,beta,mu (default <out-dir>/distribution.csv)");

    std::string val_model;
    ValidationConfig val;
    auto* valcmd = app.add_subcommand("validate", "Check a model's constraints and agreement with the oracle");
    valcmd->add_option("model", val_model, "Model JSON")->required()->check(CLI::ExistingFile);
    valcmd->add_option("--resolution", val.oracle_resolution, "Oracle relay grid size N")
        ->capture_default_str()
        ->check(CLI::Range(2, 5000));
    valcmd->add_option("--seed", val.seed, "Seed of the first random waveform")->capture_default_str();
    valcmd->add_option("--waveforms", val.random_waveforms, "Number of random waveforms")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) return run_generate(gen, out_dir);
        if (*fitcmd) return run_fit(fit, out_dir);
        if (*simcmd) {
            if (sim.input.empty() && sim.signal.empty()) throw InvalidConfiguration("give --input or --signal");
            return run_simulate(sim, out_dir);
        }
        if (*distcmd) return run_distribution(dist_model, dist_resolution, dist_output, out_dir);
        if (*valcmd) return run_validate(val_model, val);
    } catch (const FitFailure&) {
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
