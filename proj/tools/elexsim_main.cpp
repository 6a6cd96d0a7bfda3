#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "elexsim/circuits.hpp"
#include "elexsim/engine.hpp"
#include "elexsim/error.hpp"
#include "elexsim/netlist.hpp"
#include "elexsim/output.hpp"
#include "elexsim/units.hpp"

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double number(const std::string& flag, const std::string& text) {
    auto v = elex::parse_si(text);
    if (!v) throw UsageError("invalid number for " + flag + ": '" + text + "'");
    return *v;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_st("elexsim");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("%l: %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("ELEXSIM_LOG")) {
        spdlog::set_level(spdlog::level::from_str(env));
    }
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"elexsim: explicit-integration simulator for power-electronic circuits"};
    app.set_help_flag("--help", "print this help and exit");
    std::string example_name, netlist_path, method_name = "rkf", out = "elexsim_out", signals;
    std::optional<std::string> tmax, h, hmin, hmax, tol, event_dt;
    std::optional<int> relax_kmax;
    int precision = 17;
    bool no_planner = false;

    auto* ex_opt = app.add_option("--example", example_name, "built-in example name");
    auto* nl_opt = app.add_option("--netlist", netlist_path, "netlist file");
    ex_opt->excludes(nl_opt);
    app.add_option("--method", method_name, "fe or rkf")->check(CLI::IsMember({"fe", "rkf"}));
    app.add_option("--tmax", tmax, "end time");
    app.add_option("--h", h, "forward Euler step");
    app.add_option("--hmin", hmin, "smallest RKF step");
    app.add_option("--hmax", hmax, "largest RKF step");
    app.add_option("--tol", tol, "RKF local error tolerance");
    app.add_option("--event-dt", event_dt, "diode turn-off bracket width");
    app.add_option("--relax-kmax", relax_kmax, "relaxation steps (>= 2)");
    app.add_option("--signals", signals, "comma-separated output columns");
    app.add_option("-o,--out", out, "output file stem");
    app.add_option("--precision", precision, "significant digits in CSV output")->check(CLI::Range(1, 17));
    app.add_flag("--no-crossover-planner", no_planner, "do not place time points at comparator crossings");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    elex::Method method = method_name == "fe" ? elex::Method::fe : elex::Method::rkf;
    elex::Circuit circuit;
    elex::SolverConfig cfg;
    try {
        if (example_name.empty() == netlist_path.empty()) throw UsageError("give exactly one of --example or --netlist");
        if (!example_name.empty()) {
            elex::NamedExample ex = elex::example(example_name);
            circuit = std::move(ex.circuit);
            cfg = ex.cfg;
            for (const auto& note : ex.non_paper) spdlog::info("placeholder parameter: {}", note);
        } else {
            std::ifstream in(netlist_path);
            if (!in) throw UsageError("cannot open netlist '" + netlist_path + "'");
            std::stringstream buf;
            buf << in.rdbuf();
            circuit = elex::parse_netlist(buf.str());
            if (!tmax) throw UsageError("--tmax is required with --netlist");
            if (method == elex::Method::rkf && !tol) throw UsageError("--tol is required for rkf with --netlist");
            cfg.h_max = number("--tmax", *tmax) / 100.0;
            cfg.h_init = std::min(cfg.h_init, cfg.h_max);
        }
        if (method == elex::Method::fe && !h) throw UsageError("--h is required with --method fe");
        if (tmax) cfg.t_end = number("--tmax", *tmax);
        if (h) cfg.h = number("--h", *h);
        if (hmin) cfg.h_min = number("--hmin", *hmin);
        if (hmax) cfg.h_max = number("--hmax", *hmax);
        if (tol) cfg.lte_tol = number("--tol", *tol);
        if (event_dt) cfg.event_dt = number("--event-dt", *event_dt);
        if (relax_kmax) cfg.relaxation_kmax = *relax_kmax;
        cfg.crossover_planner = !no_planner;
        cfg.h_init = std::clamp(cfg.h_init, cfg.h_min, std::max(cfg.h_min, cfg.h_max));
        cfg.validate(method);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return 1;
    } catch (const elex::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        for (const auto& w : elex::validate_circuit(circuit)) spdlog::warn("{}", w);
        elex::Engine engine(circuit, cfg);
        spdlog::info("running {} to t = {} s", method_name, cfg.t_end);
        elex::SimulationResult result = engine.run(method);
        for (const auto& e : result.events) {
            if (e.kind == elex::EventKind::warning) spdlog::warn("t={} {} {}", e.t_before, e.ref, e.message);
        }
        spdlog::info("{} accepted, {} rejected steps; {} matrix assemblies; {} solves", result.stats.accepted,
                     result.stats.rejected, result.stats.assemblies, result.stats.solves);

        std::ofstream wave(out + ".csv");
        std::ofstream events(out + ".events.csv");
        if (!wave || !events) {
            std::cerr << "error: cannot write outputs with stem '" << out << "'\n";
            return 2;
        }
        elex::write_waveforms(wave, engine, result, split_list(signals), precision);
        elex::write_events(events, result, precision);
    } catch (const elex::ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const elex::Error& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
