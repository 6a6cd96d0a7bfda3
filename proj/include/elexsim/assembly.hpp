#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "elexsim/linsolve.hpp"
#include "elexsim/netlist.hpp"

namespace elex {

/// On/off state of every diode and controlled switch, in Circuit::switches
/// order. true means conducting.
struct SwitchConfig {
    std::vector<bool> bits;

    SwitchConfig() = default;
    explicit SwitchConfig(std::size_t n, bool on = false) : bits(n, on) {}
    explicit SwitchConfig(std::vector<bool> b) : bits(std::move(b)) {}

    std::size_t size() const { return bits.size(); }
    bool operator[](std::size_t i) const { return bits[i]; }
    void set(std::size_t i, bool on) { bits[i] = on; }
    void flip(std::size_t i) { bits[i] = !bits[i]; }

    /// "10" style string, switch order.
    std::string to_string() const;

    bool operator==(const SwitchConfig&) const = default;
};

struct SwitchConfigHash {
    std::size_t operator()(const SwitchConfig& s) const { return std::hash<std::vector<bool>>{}(s.bits); }
};

/// Right-hand-side inputs that are known when the algebraic system is solved.
struct KnownInputs {
    std::vector<double> states;      // per Circuit::states
    std::vector<double> sources;     // per Circuit::sources
    std::vector<double> injections;  // per Circuit::switches; empty when not relaxing
};

/// Off-state switch stamping.
struct RelaxationStamp {
    bool enabled = false;
    double conductance = 1e-6;  // G' = 1/R_off
};

/// A(S) for one switch configuration plus its factorization.
struct LinearSystem {
    DenseMatrix a;
    std::vector<std::string> row_labels;
    LuFactors factors;
    bool singular = false;
    bool relaxed = false;
};

/// Builds A: KCL rows for every non-ground node, then element equations in
/// declaration order (meters contribute two rows). Depends only on the
/// circuit and configuration.
LinearSystem assemble(const Circuit& c, const SwitchConfig& s, RelaxationStamp relax = {});

/// Builds b for the rows laid out by assemble.
std::vector<double> build_rhs(const Circuit& c, const SwitchConfig& s, const KnownInputs& k);

/// Instantaneous value of every independent source at time t.
std::vector<double> source_values(const Circuit& c, double t);

/// Current of the off-state compensating source at relaxation step k:
/// ((k-1)/(kmax-1)) * G' * (v1 - v2).
double relaxation_injection(double v1, double v2, int k, int kmax, double conductance);

/// Per Circuit::states entry: true for an inductor with parallel Rp whose
/// terminals have no conducting path other than Rp in configuration s.
std::vector<bool> isolated_inductors(const Circuit& c, const SwitchConfig& s);

/// Memoized assemble() results keyed by configuration.
class MatrixCache {
public:
    explicit MatrixCache(const Circuit& c, RelaxationStamp relax = {}) : circuit_(&c), relax_(relax) {}

    const LinearSystem& get(const SwitchConfig& s);
    const LinearSystem& get_relaxed(const SwitchConfig& s);

    /// Solves A(s) x = b with the cached factors. Throws SingularityError.
    std::vector<double> solve(const SwitchConfig& s, std::span<const double> b, bool relaxed = false);

    std::size_t assemblies() const { return assemblies_; }
    /// Distinct systems held: one per configuration, plus its relaxed variant when used.
    std::size_t distinct_configs() const { return plain_.size() + relaxed_.size(); }
    std::size_t solves() const { return solves_; }
    bool contains(const SwitchConfig& s) const { return plain_.contains(s); }
    double relax_conductance() const { return relax_.conductance; }

private:
    const Circuit* circuit_;
    RelaxationStamp relax_;
    std::unordered_map<SwitchConfig, LinearSystem, SwitchConfigHash> plain_;
    std::unordered_map<SwitchConfig, LinearSystem, SwitchConfigHash> relaxed_;
    std::size_t assemblies_ = 0;
    std::size_t solves_ = 0;
};

/// Voltage of node n taken from an unknown vector.
inline double node_voltage(const Circuit& c, std::span<const double> x, NodeId n) {
    auto idx = c.voltage_unknown(n);
    return idx ? x[*idx] : 0.0;
}

inline double element_voltage(const Circuit& c, std::span<const double> x, const Element& e) {
    return node_voltage(c, x, e.nodes[0]) - node_voltage(c, x, e.nodes[1]);
}

inline double element_current(const Circuit& c, std::span<const double> x, const Element& e) {
    return x[c.current_unknown(e)];
}

}  // namespace elex
