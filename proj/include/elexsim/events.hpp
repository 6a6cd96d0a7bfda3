#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elexsim/assembly.hpp"
#include "elexsim/control.hpp"
#include "elexsim/netlist.hpp"

namespace elex {

enum class EventKind { diode_turnoff, diode_turnon, gate_edge, comparator_crossover, warning };

std::string_view to_string(EventKind k);

struct EventRecord {
    EventKind kind = EventKind::warning;
    double t_before = 0.0;
    double t_after = 0.0;
    std::string ref;  // element or block name
    double value = 0.0;
    std::string message;
};

/// Outcome of a trial advance of `tau` seconds from the last accepted point.
struct TurnoffTrial {
    bool on = false;       // diode still conducting at the trial end
    double current = 0.0;  // diode current at the trial end
};

struct TurnoffBracket {
    double lo = 0.0;  // offset with the diode on
    double hi = 0.0;  // offset with the diode off
    double current_lo = 0.0;
    int time_iterations = 0;     // halvings until hi - lo <= event_dt
    int current_iterations = 0;  // further halvings until current_lo <= current_tol
};

/// Binary search for the diode turn-off offset in (0, h]. `trial` must report
/// on at 0 and off at h. Narrows until the bracket is at most event_dt wide
/// and the on-side current is at most current_tol. Throws EventError when the
/// end points do not straddle the event.
TurnoffBracket bisect_diode_turnoff(double h, double event_dt, const std::function<TurnoffTrial(double)>& trial,
                                    double current_tol = 1e-12, int max_iterations = 200);

/// For every inductor with Rp that has no conducting path outside Rp in
/// configuration s, replaces the internal current by its branch current.
/// Returns the mask of affected states (per Circuit::states).
std::vector<bool> apply_turnoff_substitution(const Circuit& c, const SwitchConfig& s, std::span<const double> x,
                                             std::span<double> states);

struct CrossoverPlan {
    double t_limit = 0.0;
    bool crossing = false;  // false: carrier vertex
    std::size_t comparator = 0;
    double t_cross = 0.0;
};

/// Rate of a comparator input: analytic for carriers, otherwise a finite
/// difference from the previous accepted point.
double signal_rate(const ControlGraph& g, std::size_t signal, double t, std::span<const double> signals,
                   std::span<const double> prev_signals, double prev_t);

/// Next carrier vertex strictly after t, or nullopt without carriers.
std::optional<double> next_carrier_vertex(const ControlGraph& g, double t);

/// Predicts the next comparator crossing by linear extrapolation. A crossing
/// tau* in (0, h] limits the step to t + tau* - delta (or t + tau* + delta
/// when tau* <= 2 delta), delta = max(event_dt, 1e-9). Carrier vertices inside
/// (t, t + h) also limit the step.
std::optional<CrossoverPlan> plan_crossover_points(const ControlGraph& g, double t, double h,
                                                   std::span<const double> signals,
                                                   std::span<const double> prev_signals, double prev_t,
                                                   double event_dt);

/// Warnings for inductors with Rp whose terminal voltage magnitude strictly
/// exceeds `threshold`.
std::vector<EventRecord> monitor_inductor_loop(const Circuit& c, std::span<const double> x, double t,
                                               double threshold = 1e3);

}  // namespace elex
