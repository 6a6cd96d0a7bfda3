#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elexsim/assembly.hpp"
#include "elexsim/control.hpp"
#include "elexsim/events.hpp"
#include "elexsim/netlist.hpp"

namespace elex {

enum class Method { fe, rkf };

struct SolverConfig {
    double t_end = 0.0;
    double h = 0.0;  // FE step
    double h_init = 1e-6;
    double h_min = 1e-12;
    double h_max = 1e-3;
    double lte_tol = 1e-6;
    double event_dt = 1e-12;
    int relaxation_kmax = 2;
    int relaxation_iters_max = 10;
    double relaxation_conductance = 1e-6;
    bool relaxation = true;
    std::size_t consistency_iters_max = 0;  // 0: 2^N + 1, capped at 1024
    double loop_voltage_warn = 1e3;
    bool crossover_planner = true;
    bool turnoff_bisection = true;
    bool turnoff_substitution = true;
    std::size_t max_steps = 0;  // 0: unlimited

    /// Throws ParameterError when the settings are unusable for `m`.
    void validate(Method m) const;
};

struct StateSnapshot {
    double t = 0.0;
    std::vector<double> states;          // per Circuit::states
    std::vector<double> control_states;  // per ControlGraph::state_names
    std::vector<double> x;               // algebraic unknowns
    SwitchConfig config;
    std::vector<double> signals;         // control signals
    std::vector<bool> gates;             // gate level in effect, per Circuit::switches
    std::vector<bool> pinned;            // inductor states held by the turn-off substitution
    std::vector<double> derivatives;     // electrical then control
};

struct RkfTableau {
    std::array<double, 6> alpha;
    std::array<std::array<double, 5>, 6> beta;  // beta[m][j], j < m
    std::array<double, 6> gamma4;
    std::array<double, 6> gamma5;

    static const RkfTableau& fehlberg();
};

struct ConsistencyOptions {
    std::vector<bool> gates;  // per Circuit::switches; ignored for diodes
    std::size_t max_iterations = 0;
    bool relaxation = true;
    int kmax = 2;
    int relaxation_iters_max = 10;
    std::span<const double> prev_x;
    std::optional<std::pair<std::size_t, bool>> hold;  // diode slot kept in the given state
};

struct ConsistentSolution {
    std::vector<double> x;
    SwitchConfig config;
    std::size_t iterations = 0;
    bool relaxed = false;
    int relaxation_iterations = 0;
};

ConsistentSolution consistent_solve(const Circuit& c, MatrixCache& cache, SwitchConfig s, const KnownInputs& k,
                                    const ConsistencyOptions& opt);

struct RelaxedSolution {
    std::vector<double> x;
    int iterations = 0;  // fixed-point solves summed over k = 1..kmax
};

RelaxedSolution relaxed_solve(const Circuit& c, MatrixCache& cache, const SwitchConfig& s, const KnownInputs& k,
                              std::span<const double> prev_x, int kmax, int iters_max);

/// dV_C/dt = i_C / C and di_L/dt = V_L / L; pinned states get 0.
std::vector<double> state_derivatives(const Circuit& c, std::span<const double> x,
                                      const std::vector<bool>& pinned = {});

struct StepDecision {
    bool accept = false;
    double h_next = 0.0;
    bool floored = false;  // accepted only because h was already h_min
};

StepDecision adapt_step(std::span<const double> lte, double h, const SolverConfig& cfg);

struct StepStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t floored = 0;
    std::size_t assemblies = 0;
    std::size_t distinct_configs = 0;
    std::size_t solves = 0;
    std::size_t bisections = 0;
    int max_bisection_time_iterations = 0;
    int max_bisection_current_iterations = 0;
    std::size_t relaxed_solves = 0;
    std::size_t planner_truncations = 0;
    double h_smallest = 0.0;
};

struct SimulationResult {
    std::vector<StateSnapshot> points;
    std::vector<EventRecord> events;
    StepStats stats;
    bool completed = true;
};

struct RkfStepResult {
    StateSnapshot candidate;  // gates still frozen at their step-start values
    std::vector<double> lte;
    std::vector<bool> turned_off;  // per switch: diode on at the start, off in some stage or at the end
    std::vector<bool> turned_on;   // per switch: diode off at the start, on in some stage or at the end
};

class Engine {
public:
    Engine(Circuit c, SolverConfig cfg);
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    const Circuit& circuit() const { return circuit_; }
    const ControlGraph& controls() const { return graph_; }
    const SolverConfig& config() const { return cfg_; }
    MatrixCache& cache() { return cache_; }

    /// Consistent point at t = 0 from the declared initial conditions.
    StateSnapshot initial_snapshot();

    /// Solves the circuit and the control graph at one time point with the
    /// gates held at `gates`.
    StateSnapshot solve_point(double t, std::vector<double> states, std::vector<double> control_states,
                              std::vector<bool> gates, const SwitchConfig& guess, std::vector<bool> pinned,
                              std::span<const double> prev_x);

    /// Applies the gate levels computed from the control signals, then the
    /// turn-off substitution, re-solving as needed.
    void finalize(StateSnapshot& snap, std::vector<EventRecord>* events = nullptr);

    StateSnapshot fe_step(const StateSnapshot& snap, double h);
    /// `hold` keeps one diode in the given state in every stage.
    RkfStepResult rkf_step(const StateSnapshot& snap, double h,
                           std::optional<std::pair<std::size_t, bool>> hold = std::nullopt);

    SimulationResult run(Method m);

    /// Unknown labels, state names and signal names, as exported to CSV.
    std::vector<std::string> column_names() const;
    std::vector<double> columns(const StateSnapshot& s) const;

private:
    std::vector<bool> gates_from_signals(std::span<const double> signals) const;
    SimulationResult run_fe();
    SimulationResult run_rkf();
    void accept_point(SimulationResult& r, StateSnapshot snap, bool detect_diode_events = true);
    void fill_stats(SimulationResult& r) const;

    Circuit circuit_;
    SolverConfig cfg_;
    ControlGraph graph_;
    MatrixCache cache_;
    std::size_t relaxed_solves_ = 0;
    std::optional<std::pair<std::size_t, bool>> hold_;
    std::vector<std::size_t> loop_warnings_;  // per Circuit::states
};

}  // namespace elex
