#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "elexsim/netlist.hpp"

namespace elex {

/// Parallel form of Kc (1 + s/wz) / (1 + s/wp):
/// H(s) = feedthrough + state_path_gain / (1 + s/pole).
struct FilterDecomposition {
    double feedthrough = 0.0;
    double state_path_gain = 0.0;
    double pole = 0.0;
    double k = 0.0;  // 1 - wp/wz
};

FilterDecomposition decompose_filter(double kc, double wz, double wp);

/// Triangle (min at t = 0, max at half period) or sawtooth carrier.
double carrier_value(BlockKind kind, double min, double max, double f, double t);

/// Clamped RKF stage value: state_n + sum_j beta_row[j] * k[j].
double integrator_stage_update(double state_n, std::span<const double> k, std::span<const double> beta_row,
                               double out_min, double out_max);

struct ControlEvaluation {
    std::vector<double> signals;      // indexed like ControlGraph::signal_names()
    std::vector<double> derivatives;  // indexed like ControlGraph::state_names()
    std::size_t passes = 0;
};

/// Comparator whose inputs are known, for the crossover planner.
struct ComparatorInfo {
    std::size_t block = 0;
    std::size_t input_a = 0;  // signal indices
    std::size_t input_b = 0;
    std::size_t output = 0;
};

/// Carrier block description.
struct CarrierInfo {
    std::size_t block = 0;
    std::size_t signal = 0;
    BlockKind kind = BlockKind::triangle;
    double min = 0.0, max = 1.0, f = 1.0;
};

/// Control flow graph bound to a circuit. Meter outputs feed the graph;
/// comparator outputs drive switch gates.
class ControlGraph {
public:
    ControlGraph() = default;
    static ControlGraph build(const Circuit& c);

    bool empty() const { return blocks_.empty(); }
    const std::vector<std::string>& signal_names() const { return signal_names_; }
    std::optional<std::size_t> signal_index(std::string_view name) const;
    const std::vector<std::string>& state_names() const { return state_names_; }
    std::size_t state_count() const { return state_names_.size(); }
    std::size_t pass_count() const { return schedule_.size(); }

    std::vector<double> initial_states() const;

    /// Brings stage/accepted state values into their limits.
    void clamp_states(std::span<double> states) const;
    std::vector<std::pair<double, double>> state_bounds() const;

    /// Fires every block once: feedback, sources and state outputs first, then
    /// passes over blocks whose inputs are fresh.
    ControlEvaluation evaluate(double t, std::span<const double> states, std::span<const double> feedback) const;

    /// Gate level per Circuit::switches entry; diodes have no gate.
    std::vector<double> gate_values(const Circuit& c, std::span<const double> signals) const;

    const std::vector<ComparatorInfo>& comparators() const { return comparators_; }
    const std::vector<CarrierInfo>& carriers() const { return carriers_; }
    /// Carrier feeding signal i directly, if any.
    const CarrierInfo* carrier_for_signal(std::size_t i) const;
    /// Step-block switching times.
    std::vector<double> step_times() const;

private:
    struct Node {
        BlockSpec spec;
        std::vector<std::size_t> inputs;  // signal indices
        std::size_t output = 0;
        std::optional<std::size_t> complement;
        std::optional<std::size_t> state;
        FilterDecomposition filter;
    };

    std::vector<Node> blocks_;
    std::vector<std::string> signal_names_;
    std::unordered_map<std::string, std::size_t> signal_lookup_;
    std::vector<std::string> state_names_;
    std::vector<std::size_t> state_block_;
    std::size_t feedback_count_ = 0;
    std::vector<std::size_t> sources_;                 // blocks evaluated first
    std::vector<std::vector<std::size_t>> schedule_;   // passes
    std::vector<ComparatorInfo> comparators_;
    std::vector<CarrierInfo> carriers_;
};

}  // namespace elex
