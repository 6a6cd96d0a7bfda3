#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "elexsim/control.hpp"
#include "elexsim/engine.hpp"
#include "elexsim/netlist.hpp"

namespace elex {

struct NamedExample {
    std::string name;
    std::string description;
    Circuit circuit;
    ControlGraph controls;
    SolverConfig cfg;  // recommended settings
    Method method = Method::rkf;
    std::vector<std::string> non_paper;  // values chosen here, not taken from the source figures
};

/// hwrect, series_switches, boost, vsc_cc or buck_vc. Throws ParameterError.
NamedExample example(std::string_view name);
std::vector<std::string> example_names();

Circuit hwrect_circuit();

/// Source v0 feeding two series switches; gates follow the scenario
/// (1,0) until 1 ms, (0,1) until 2 ms, then (0,0).
Circuit series_switches_circuit(double v0 = 10.0);

/// Boost converter; rp = 0 drops the inductor's parallel resistance.
Circuit boost_circuit(double rp = 1e6);

struct VscParams {
    double v0 = 200.0;  // half the dc link
    double l = 10e-3;
    double vg = 100.0;  // grid amplitude
    double f = 50.0;
    double f_tri = 20e3;
};
Circuit vsc_cc_circuit(const VscParams& p = {});

Circuit buck_vc_circuit();

/// Single capacitor discharging into a resistor: dV/dt = -V/(R C).
Circuit rc_discharge_circuit(double r, double c, double v0);

}  // namespace elex
