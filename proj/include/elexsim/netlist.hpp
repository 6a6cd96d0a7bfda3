#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace elex {

/// Dense node index; 0 is the reference (ground) node.
struct NodeId {
    std::size_t index = 0;

    constexpr bool is_ground() const { return index == 0; }
    friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

inline constexpr NodeId kGround{0};

enum class ElementKind {
    resistor,
    capacitor,
    inductor,
    dc_source,
    sine_source,
    diode,
    controlled_switch,
    ammeter,
    voltmeter,
};

std::string_view to_string(ElementKind kind);

/// One circuit element. Branch current flows from nodes[0] to nodes[1]
/// through the element.
struct Element {
    std::string name;
    ElementKind kind = ElementKind::resistor;
    std::array<NodeId, 2> nodes{};

    // Primary value: R (ohm), C (F), L (H), V (V) or Vm (V) depending on kind.
    double value = 0.0;
    double frequency = 0.0;       // sine source, Hz
    double phase = 0.0;           // sine source, rad
    double von = 0.0;             // diode on-state drop
    double series_r1 = 0.0;       // capacitor: 0 means none
    double parallel_rp = 0.0;     // inductor: 0 means none
    std::optional<double> initial;  // capacitor voltage / inductor current at t=0

    // Gate signal (controlled switch) or output signal (meters).
    std::string signal;

    // Index of the element this one was generated from (series R1 of a
    // capacitor), or nullopt for user-declared elements.
    std::optional<std::size_t> generated_by;

    // Bookkeeping assigned when the circuit is finalized.
    std::size_t branch = 0;                 // ordinal among branch currents
    std::optional<std::size_t> meter;       // ordinal among meter outputs
    std::optional<std::size_t> state;       // ordinal among state variables
    std::optional<std::size_t> switch_slot; // ordinal among switches/diodes
    std::optional<std::size_t> source;      // ordinal among independent sources

    bool is_switching() const {
        return kind == ElementKind::diode || kind == ElementKind::controlled_switch;
    }
    bool is_meter() const { return kind == ElementKind::ammeter || kind == ElementKind::voltmeter; }
    bool operator==(const Element&) const = default;
};

enum class BlockKind {
    constant,
    sine,
    triangle,
    sawtooth,
    step,
    sum,
    gain,
    comparator,
    integrator,
    filter,
};

std::string_view to_string(BlockKind kind);

/// Declaration of one control block as written in the `[control]` section.
/// The block's output signal carries the block's name.
struct BlockSpec {
    std::string name;
    BlockKind kind = BlockKind::constant;
    std::vector<std::string> inputs;
    std::map<std::string, double> params;
    std::string signs;       // sum: one '+' or '-' per input
    std::string complement;  // comparator: optional inverted output name

    double param(const std::string& key, double fallback) const;
    bool operator==(const BlockSpec&) const = default;
};

/// A validated circuit. Unknown vector layout: non-ground node voltages in
/// node order, then one branch current per element in declaration order,
/// then one output variable per meter.
struct Circuit {
    std::vector<std::string> node_names;  // [0] is "0"
    std::vector<Element> elements;
    std::vector<std::size_t> switches;  // diodes and controlled switches
    std::vector<std::size_t> states;    // capacitors and inductors
    std::vector<std::size_t> sources;   // dc and sine sources
    std::vector<std::size_t> meters;    // ammeters and voltmeters
    std::vector<BlockSpec> control;

    std::size_t node_count() const { return node_names.size(); }
    std::size_t unknown_count() const {
        return node_count() - 1 + elements.size() + meters.size();
    }

    /// Unknown index of a node voltage; nullopt for ground.
    std::optional<std::size_t> voltage_unknown(NodeId n) const {
        if (n.is_ground()) return std::nullopt;
        return n.index - 1;
    }
    std::size_t current_unknown(const Element& e) const { return node_count() - 1 + e.branch; }
    std::size_t meter_unknown(const Element& e) const {
        return node_count() - 1 + elements.size() + *e.meter;
    }

    std::optional<std::size_t> find_element(std::string_view name) const;
    std::optional<NodeId> find_node(std::string_view name) const;

    /// Labels such as "V(2)", "i(d1)", "ifb" for every unknown, in order.
    std::vector<std::string> unknown_labels() const;

    bool operator==(const Circuit&) const = default;
};

/// Incremental construction of a Circuit with the same checks the parser
/// applies. Node names are mapped to indices in order of first appearance.
class CircuitBuilder {
public:
    CircuitBuilder& resistor(const std::string& name, const std::string& a, const std::string& b, double r);
    CircuitBuilder& capacitor(const std::string& name, const std::string& a, const std::string& b, double c,
                              double r1 = 0.0, std::optional<double> ic = std::nullopt);
    CircuitBuilder& inductor(const std::string& name, const std::string& a, const std::string& b, double l,
                             double rp = 0.0, std::optional<double> ic = std::nullopt);
    CircuitBuilder& dc_source(const std::string& name, const std::string& a, const std::string& b, double v);
    CircuitBuilder& sine_source(const std::string& name, const std::string& a, const std::string& b, double vm,
                                double f, double phase = 0.0);
    CircuitBuilder& diode(const std::string& name, const std::string& a, const std::string& b, double von = 0.0);
    CircuitBuilder& controlled_switch(const std::string& name, const std::string& a, const std::string& b,
                                      const std::string& gate);
    CircuitBuilder& ammeter(const std::string& name, const std::string& a, const std::string& b,
                            const std::string& out);
    CircuitBuilder& voltmeter(const std::string& name, const std::string& a, const std::string& b,
                              const std::string& out);
    CircuitBuilder& block(BlockSpec spec);

    /// Validates topology and assigns all indices. Throws ParseError.
    Circuit build() const;

private:
    NodeId node(const std::string& name);
    Element& add(std::string name, ElementKind kind, const std::string& a, const std::string& b);

    std::vector<std::string> node_names_{"0"};
    std::vector<Element> elements_;
    std::vector<BlockSpec> control_;
    std::vector<std::size_t> lines_;  // source line per element, 0 if programmatic
    std::size_t current_line_ = 0;

    friend Circuit parse_netlist(std::string_view text);
};

/// Parses netlist text:
///
///   name kind node node key=value...     (one element per line)
///   [control]                            (starts the control block section)
///   name kind input... key=value...
///
/// `#` starts a comment. Numbers accept SI suffixes p, n, u, m, k, meg.
Circuit parse_netlist(std::string_view text);

/// Inverse of parse_netlist; generated elements fold back into their parent.
std::string serialize_netlist(const Circuit& circuit);

/// Topology warnings (singular-matrix risks); never throws.
std::vector<std::string> validate_circuit(const Circuit& circuit);

}  // namespace elex
