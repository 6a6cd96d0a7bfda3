#include "elexsim/events.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "elexsim/error.hpp"

namespace elex {

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::diode_turnoff: return "diode_turnoff";
        case EventKind::diode_turnon: return "diode_turnon";
        case EventKind::gate_edge: return "gate_edge";
        case EventKind::comparator_crossover: return "comparator_crossover";
        case EventKind::warning: return "warning";
    }
    return "unknown";
}

TurnoffBracket bisect_diode_turnoff(double h, double event_dt, const std::function<TurnoffTrial(double)>& trial,
                                    double current_tol, int max_iterations) {
    if (!(h > 0.0) || !(event_dt > 0.0)) throw ParameterError("bisection: h and event_dt must be positive");
    const TurnoffTrial end = trial(h);
    if (end.on) throw EventError("bisection: diode still conducting at the end of the interval");
    TurnoffBracket b;
    b.hi = h;
    TurnoffTrial at_lo = trial(0.0);
    if (!at_lo.on) throw EventError("bisection: diode not conducting at the start of the interval");
    b.current_lo = at_lo.current;

    auto halve = [&]() {
        const double mid = b.lo + 0.5 * (b.hi - b.lo);
        if (mid <= b.lo || mid >= b.hi) return false;
        const TurnoffTrial r = trial(mid);
        if (r.on) {
            b.lo = mid;
            b.current_lo = r.current;
        } else {
            b.hi = mid;
        }
        return true;
    };
    int total = 0;
    while (b.hi - b.lo > event_dt && total < max_iterations) {
        if (!halve()) break;
        ++b.time_iterations;
        ++total;
    }
    while (b.current_lo > current_tol && total < max_iterations) {
        if (!halve()) break;
        ++b.current_iterations;
        ++total;
    }
    if (b.hi - b.lo > event_dt) {
        std::ostringstream os;
        os << "bisection: bracket [" << b.lo << ", " << b.hi << "] did not narrow to " << event_dt;
        throw EventError(os.str());
    }
    return b;
}

std::vector<bool> apply_turnoff_substitution(const Circuit& c, const SwitchConfig& s, std::span<const double> x,
                                             std::span<double> states) {
    std::vector<bool> mask = isolated_inductors(c, s);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) states[i] = element_current(c, x, c.elements[c.states[i]]);
    }
    return mask;
}

double signal_rate(const ControlGraph& g, std::size_t signal, double t, std::span<const double> signals,
                   std::span<const double> prev_signals, double prev_t) {
    if (const CarrierInfo* ci = g.carrier_for_signal(signal)) {
        const double span = ci->max - ci->min;
        if (ci->kind == BlockKind::sawtooth) return span * ci->f;
        double phase = ci->f * t;
        const double nearest = std::round(phase);
        if (std::abs(phase - nearest) <= 1e-9) phase = nearest;
        const double frac = phase - std::floor(phase);
        return (frac < 0.5 ? 2.0 : -2.0) * span * ci->f;
    }
    if (prev_signals.size() != signals.size() || !(t > prev_t)) return 0.0;
    return (signals[signal] - prev_signals[signal]) / (t - prev_t);
}

std::optional<double> next_carrier_vertex(const ControlGraph& g, double t) {
    std::optional<double> best;
    for (const auto& ci : g.carriers()) {
        const double per_unit = ci.kind == BlockKind::triangle ? 2.0 * ci.f : ci.f;
        const double spacing = 1.0 / per_unit;
        double n = std::floor(t * per_unit);
        double v = (n + 1.0) / per_unit;
        while (v <= t + 1e-9 * spacing) {
            n += 1.0;
            v = (n + 1.0) / per_unit;
        }
        if (!best || v < *best) best = v;
    }
    return best;
}

std::optional<CrossoverPlan> plan_crossover_points(const ControlGraph& g, double t, double h,
                                                   std::span<const double> signals,
                                                   std::span<const double> prev_signals, double prev_t,
                                                   double event_dt) {
    const double delta = std::max(event_dt, 1e-9);
    std::optional<CrossoverPlan> plan;
    auto offer = [&](const CrossoverPlan& p) {
        if (p.t_limit > t && p.t_limit < t + h && (!plan || p.t_limit < plan->t_limit)) plan = p;
    };
    for (std::size_t i = 0; i < g.comparators().size(); ++i) {
        const auto& cmp = g.comparators()[i];
        const double d = signals[cmp.input_a] - signals[cmp.input_b];
        const double rate = signal_rate(g, cmp.input_a, t, signals, prev_signals, prev_t) -
                            signal_rate(g, cmp.input_b, t, signals, prev_signals, prev_t);
        if (rate == 0.0 || d == 0.0) continue;
        const double tau = -d / rate;
        if (!(tau > 0.0) || tau > h) continue;
        CrossoverPlan p;
        p.crossing = true;
        p.comparator = i;
        p.t_cross = t + tau;
        p.t_limit = tau > 2.0 * delta ? t + tau - delta : t + tau + delta;
        offer(p);
    }
    if (auto v = next_carrier_vertex(g, t)) {
        CrossoverPlan p;
        p.t_limit = *v;
        p.t_cross = *v;
        offer(p);
    }
    return plan;
}

std::vector<EventRecord> monitor_inductor_loop(const Circuit& c, std::span<const double> x, double t,
                                               double threshold) {
    std::vector<EventRecord> out;
    for (std::size_t st : c.states) {
        const auto& e = c.elements[st];
        if (e.kind != ElementKind::inductor || e.parallel_rp == 0.0) continue;
        const double v = element_voltage(c, x, e);
        if (std::abs(v) > threshold) {
            std::ostringstream os;
            os << "inductor loop voltage |V_L| = " << std::abs(v) << " V exceeds " << threshold << " V";
            out.push_back({EventKind::warning, t, t, e.name, v, os.str()});
        }
    }
    return out;
}

}  // namespace elex
