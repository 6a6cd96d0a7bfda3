#include "elexsim/circuits.hpp"

#include <cmath>
#include <numbers>

#include "elexsim/error.hpp"

namespace elex {

namespace {

BlockSpec block(std::string name, BlockKind kind, std::vector<std::string> inputs,
                std::map<std::string, double> params = {}) {
    BlockSpec b;
    b.name = std::move(name);
    b.kind = kind;
    b.inputs = std::move(inputs);
    b.params = std::move(params);
    if (b.kind == BlockKind::sum) b.signs.assign(b.inputs.size(), '+');
    return b;
}

BlockSpec sum(std::string name, std::vector<std::string> inputs, std::string signs) {
    BlockSpec b = block(std::move(name), BlockKind::sum, std::move(inputs));
    b.signs = std::move(signs);
    return b;
}

BlockSpec comparator(std::string name, std::string a, std::string b, std::string complement = {}) {
    BlockSpec s = block(std::move(name), BlockKind::comparator, {std::move(a), std::move(b)});
    s.complement = std::move(complement);
    return s;
}

}  // namespace

Circuit hwrect_circuit() {
    return CircuitBuilder()
        .sine_source("vs", "1", "0", 10.0, 50.0)
        .diode("d1", "1", "2")
        .capacitor("c1", "2", "0", 1e-3, 10e-3)
        .resistor("r1", "2", "0", 200.0)
        .build();
}

Circuit series_switches_circuit(double v0) {
    return CircuitBuilder()
        .dc_source("v0", "a", "0", v0)
        .controlled_switch("s1", "a", "b", "g1")
        .controlled_switch("s2", "b", "0", "g2")
        .block(block("g1", BlockKind::step, {}, {{"v0", 1.0}, {"v1", 0.0}, {"t", 1e-3}}))
        .block(block("g2on", BlockKind::step, {}, {{"v0", 0.0}, {"v1", 1.0}, {"t", 1e-3}}))
        .block(block("g2off", BlockKind::step, {}, {{"v0", 0.0}, {"v1", -1.0}, {"t", 2e-3}}))
        .block(sum("g2", {"g2on", "g2off"}, "++"))
        .build();
}

Circuit boost_circuit(double rp) {
    return CircuitBuilder()
        .dc_source("vin", "1", "0", 12.0)
        .inductor("l1", "1", "2", 100e-6, rp)
        .controlled_switch("s1", "2", "0", "g")
        .diode("d1", "2", "3")
        .capacitor("c1", "3", "0", 100e-6)
        .resistor("rl", "3", "0", 100.0)
        .block(block("duty", BlockKind::constant, {}, {{"v", 0.3}}))
        .block(block("saw", BlockKind::sawtooth, {}, {{"f", 25e3}, {"min", 0.0}, {"max", 1.0}}))
        .block(comparator("g", "duty", "saw"))
        .build();
}

Circuit vsc_cc_circuit(const VscParams& p) {
    const double w_tri = 2.0 * std::numbers::pi * p.f_tri;
    const double kp = w_tri * p.l / 10.0;
    return CircuitBuilder()
        .dc_source("vdc", "p", "0", 2.0 * p.v0)
        .controlled_switch("s1", "p", "a", "g1")
        .controlled_switch("s2", "a", "0", "g2")
        .controlled_switch("s3", "p", "b", "g3")
        .controlled_switch("s4", "b", "0", "g4")
        .inductor("l1", "a", "m1", p.l)
        .ammeter("am1", "m1", "m2", "ifb")
        .sine_source("vg", "m2", "b", p.vg, p.f)
        .voltmeter("vm1", "b", "m2", "vfb")
        .block(block("iref", BlockKind::sine, {},
                     {{"im", 2.5 * std::numbers::sqrt2}, {"f", p.f}, {"phase", -std::numbers::pi / 6.0}}))
        .block(block("xtri", BlockKind::triangle, {}, {{"f", p.f_tri}, {"min", -1.0}, {"max", 1.0}}))
        .block(sum("x1", {"iref", "ifb"}, "+-"))
        .block(block("x2", BlockKind::gain, {"x1"}, {{"k", kp}}))
        .block(sum("x3", {"x2", "vfb"}, "+-"))
        .block(block("x4", BlockKind::gain, {"x3"}, {{"k", 1.0 / (2.0 * p.v0)}}))
        .block(block("x4n", BlockKind::gain, {"x4"}, {{"k", -1.0}}))
        .block(comparator("g1", "x4", "xtri", "g2"))
        .block(comparator("g3", "x4n", "xtri", "g4"))
        .build();
}

Circuit buck_vc_circuit() {
    return CircuitBuilder()
        .dc_source("vdc", "1", "0", 25.0)
        .controlled_switch("s1", "1", "2", "g")
        .diode("d1", "0", "2")
        .inductor("l1", "2", "3", 24e-6, 1e6)
        .capacitor("c1", "3", "0", 500e-6, 0.08)
        .resistor("rl", "3", "0", 4.0)
        .voltmeter("vm1", "3", "0", "vfb")
        .block(block("vref", BlockKind::step, {}, {{"v0", 12.0}, {"v1", 15.0}, {"t", 10e-3}}))
        .block(block("xtri", BlockKind::sawtooth, {}, {{"f", 400e3}, {"min", 0.0}, {"max", 1.0}}))
        .block(sum("x1", {"vref", "vfb"}, "+-"))
        .block(block("x8", BlockKind::filter, {"x1"}, {{"kc", 4.551e3}, {"wz", 6.492e3}, {"wp", 6.081e5}}))
        .block(block("x9", BlockKind::integrator, {"x8"}, {{"gain", 1.0}, {"min", 0.0}, {"max", 1.0}}))
        .block(comparator("g", "x9", "xtri"))
        .build();
}

Circuit rc_discharge_circuit(double r, double c, double v0) {
    return CircuitBuilder().capacitor("c1", "1", "0", c, 0.0, v0).resistor("r1", "1", "0", r).build();
}

std::vector<std::string> example_names() { return {"hwrect", "series_switches", "boost", "vsc_cc", "buck_vc"}; }

NamedExample example(std::string_view name) {
    NamedExample ex;
    ex.name = std::string(name);
    SolverConfig& cfg = ex.cfg;
    if (name == "hwrect") {
        ex.description = "half-wave rectifier with capacitor filter";
        ex.circuit = hwrect_circuit();
        cfg.t_end = 60e-3;
        cfg.h_init = 1e-6;
        cfg.h_max = 0.5e-3;
        cfg.lte_tol = 1e-6;
        cfg.h = 10e-6;
    } else if (name == "series_switches") {
        ex.description = "two series controlled switches across a dc source";
        ex.circuit = series_switches_circuit();
        cfg.t_end = 3e-3;
        cfg.h_init = 1e-5;
        cfg.h_max = 0.1e-3;
        cfg.h = 1e-5;
    } else if (name == "boost") {
        ex.description = "open-loop boost converter in discontinuous conduction";
        ex.circuit = boost_circuit();
        ex.non_paper = {"vin=12", "l1=100u", "l1.rp=1meg", "c1=100u", "rl=100", "f_sw=25k", "duty=0.3"};
        cfg.t_end = 10e-3;
        cfg.h_init = 1e-7;
        cfg.h_max = 4e-6;
        cfg.lte_tol = 1e-6;
        cfg.h = 1e-8;
    } else if (name == "vsc_cc") {
        ex.description = "current-controlled single-phase voltage source converter";
        ex.circuit = vsc_cc_circuit();
        ex.non_paper = {"V0=200", "l1=10m", "vg=100", "full-bridge reduction of the converter"};
        cfg.t_end = 40e-3;
        cfg.h_init = 1e-7;
        cfg.h_max = 5e-6;
        cfg.lte_tol = 1e-6;
        cfg.h = 1e-8;
    } else if (name == "buck_vc") {
        ex.description = "voltage-controlled buck converter with Vref step";
        ex.circuit = buck_vc_circuit();
        ex.non_paper = {"l1.rp=1meg"};
        cfg.t_end = 20e-3;
        cfg.h_init = 1e-8;
        cfg.h_max = 0.25e-6;
        cfg.lte_tol = 1e-6;
        cfg.h = 1e-9;
    } else {
        throw ParameterError("unknown example '" + std::string(name) + "'");
    }
    ex.controls = ControlGraph::build(ex.circuit);
    return ex;
}

}  // namespace elex
