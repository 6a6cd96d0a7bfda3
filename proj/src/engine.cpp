#include "elexsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "elexsim/error.hpp"

namespace elex {

void SolverConfig::validate(Method m) const {
    if (!(t_end >= 0.0)) throw ParameterError("t_end must be non-negative");
    if (!(event_dt > 0.0)) throw ParameterError("event_dt must be positive");
    if (relaxation_kmax < 2) throw ParameterError("relaxation kmax must be at least 2");
    if (relaxation_iters_max < 1) throw ParameterError("relaxation iteration limit must be positive");
    if (m == Method::fe) {
        if (!(h > 0.0)) throw ParameterError("forward Euler needs a positive step h");
        return;
    }
    if (!(h_min > 0.0) || !(h_min <= h_init) || !(h_init <= h_max)) {
        throw ParameterError("step bounds must satisfy 0 < h_min <= h_init <= h_max");
    }
    if (!(lte_tol > 0.0)) throw ParameterError("lte_tol must be positive");
}

const RkfTableau& RkfTableau::fehlberg() {
    static const RkfTableau t = [] {
        RkfTableau r{};
        r.alpha = {0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0};
        r.beta[1] = {1.0 / 4.0};
        r.beta[2] = {3.0 / 32.0, 9.0 / 32.0};
        r.beta[3] = {1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0};
        r.beta[4] = {439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0};
        r.beta[5] = {-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0};
        r.gamma4 = {25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0};
        r.gamma5 = {16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0};
        return r;
    }();
    return t;
}

namespace {

constexpr double kOnCurrentTol = 1e-12;
constexpr double kOffVoltageTol = 1e-10;
constexpr double kRelaxNodeTol = 1e-9;

std::string describe_config(const Circuit& c, const SwitchConfig& s) {
    std::string out = s.to_string() + " (";
    for (std::size_t i = 0; i < c.switches.size(); ++i) {
        if (i) out += ", ";
        out += c.elements[c.switches[i]].name + (s[i] ? "=on" : "=off");
    }
    return out + ")";
}

}  // namespace

ConsistentSolution consistent_solve(const Circuit& c, MatrixCache& cache, SwitchConfig s, const KnownInputs& k,
                                    const ConsistencyOptions& opt) {
    const std::size_t n = c.switches.size();
    if (s.size() != n) s = SwitchConfig(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (c.elements[c.switches[i]].kind == ElementKind::controlled_switch) {
            s.set(i, i < opt.gates.size() && opt.gates[i]);
        }
    }
    if (opt.hold) s.set(opt.hold->first, opt.hold->second);
    std::size_t cap = opt.max_iterations;
    if (cap == 0) cap = n >= 10 ? 1024 : (std::size_t{1} << n) + 1;

    std::unordered_set<SwitchConfig, SwitchConfigHash> visited;
    ConsistentSolution out;
    for (std::size_t it = 0; it < cap; ++it) {
        out.iterations = it + 1;
        if (cache.get(s).singular) {
            visited.insert(s);
            std::optional<SwitchConfig> alt;
            for (std::size_t i = 0; i < n && !alt; ++i) {
                if (c.elements[c.switches[i]].kind != ElementKind::diode || !s[i] || (opt.hold && opt.hold->first == i)) continue;
                SwitchConfig t = s;
                t.set(i, false);
                if (!visited.contains(t) && !cache.get(t).singular) alt = t;
            }
            if (alt) {
                s = *alt;
                continue;
            }
            bool any_off_controlled = false;
            for (std::size_t i = 0; i < n; ++i) {
                any_off_controlled |= c.elements[c.switches[i]].kind == ElementKind::controlled_switch && !s[i];
            }
            if (opt.relaxation && any_off_controlled) {
                RelaxedSolution r = relaxed_solve(c, cache, s, k, opt.prev_x, opt.kmax, opt.relaxation_iters_max);
                out.x = std::move(r.x);
                out.config = s;
                out.relaxed = true;
                out.relaxation_iterations = r.iterations;
                return out;
            }
            throw SingularityError("singular system matrix for switch configuration " + describe_config(c, s));
        }
        std::vector<double> x = cache.solve(s, build_rhs(c, s, k));

        struct Violation {
            std::size_t slot;
            double magnitude;
        };
        std::vector<Violation> bad;
        for (std::size_t i = 0; i < n; ++i) {
            const Element& e = c.elements[c.switches[i]];
            if (e.kind != ElementKind::diode || (opt.hold && opt.hold->first == i)) continue;
            if (s[i]) {
                const double cur = element_current(c, x, e);
                if (cur < -kOnCurrentTol) bad.push_back({i, -cur});
            } else {
                const double v = element_voltage(c, x, e);
                if (v > e.von + kOffVoltageTol) bad.push_back({i, v - e.von});
            }
        }
        if (bad.empty()) {
            out.x = std::move(x);
            out.config = s;
            return out;
        }
        visited.insert(s);
        SwitchConfig next = s;
        for (const auto& v : bad) next.flip(v.slot);
        if (visited.contains(next)) {
            auto worst = std::max_element(bad.begin(), bad.end(),
                                          [](const Violation& a, const Violation& b) { return a.magnitude < b.magnitude; });
            next = s;
            next.flip(worst->slot);
        }
        if (visited.contains(next)) {
            std::string names;
            for (const auto& v : bad) names += (names.empty() ? "" : ", ") + c.elements[c.switches[v.slot]].name;
            throw NonConvergenceError("switch consistency loop cycles; oscillating switches: " + names);
        }
        s = std::move(next);
    }
    throw NonConvergenceError("no consistent switch configuration within " + std::to_string(cap) + " iterations");
}

RelaxedSolution relaxed_solve(const Circuit& c, MatrixCache& cache, const SwitchConfig& s, const KnownInputs& k,
                              std::span<const double> prev_x, int kmax, int iters_max) {
    const std::size_t n = c.unknown_count();
    std::vector<double> xcur(n, 0.0);
    if (prev_x.size() == n) std::copy(prev_x.begin(), prev_x.end(), xcur.begin());
    const std::size_t nv = c.node_count() - 1;
    RelaxedSolution out;
    KnownInputs kk = k;
    kk.injections.assign(c.switches.size(), 0.0);
    for (int step = 1; step <= kmax; ++step) {
        for (int it = 1;; ++it) {
            for (std::size_t i = 0; i < c.switches.size(); ++i) {
                const Element& e = c.elements[c.switches[i]];
                kk.injections[i] = 0.0;
                if (e.kind == ElementKind::controlled_switch && !s[i]) {
                    kk.injections[i] = relaxation_injection(node_voltage(c, xcur, e.nodes[0]),
                                                            node_voltage(c, xcur, e.nodes[1]), step, kmax,
                                                            cache.relax_conductance());
                }
            }
            std::vector<double> xn = cache.solve(s, build_rhs(c, s, kk), true);
            ++out.iterations;
            double change = 0.0;
            for (std::size_t j = 0; j < nv; ++j) change = std::max(change, std::abs(xn[j] - xcur[j]));
            xcur = std::move(xn);
            if (step == 1 || change < kRelaxNodeTol) break;
            if (it >= iters_max) {
                throw NonConvergenceError("relaxation did not converge for switch configuration " +
                                          describe_config(c, s));
            }
        }
    }
    out.x = std::move(xcur);
    return out;
}

std::vector<double> state_derivatives(const Circuit& c, std::span<const double> x,
                                      const std::vector<bool>& pinned) {
    std::vector<double> d(c.states.size(), 0.0);
    for (std::size_t i = 0; i < c.states.size(); ++i) {
        if (i < pinned.size() && pinned[i]) continue;
        const Element& e = c.elements[c.states[i]];
        if (e.kind == ElementKind::capacitor) {
            d[i] = element_current(c, x, e) / e.value;
        } else {
            d[i] = element_voltage(c, x, e) / e.value;
        }
    }
    return d;
}

StepDecision adapt_step(std::span<const double> lte, double h, const SolverConfig& cfg) {
    double worst = 0.0;
    bool finite = true;
    for (double e : lte) {
        if (!std::isfinite(e)) finite = false;
        else worst = std::max(worst, e);
    }
    double factor = 4.0;
    if (!finite) {
        factor = 0.1;
    } else if (worst > 0.0) {
        factor = std::clamp(0.84 * std::pow(cfg.lte_tol / worst, 0.25), 0.1, 4.0);
    }
    StepDecision d;
    d.h_next = std::clamp(h * factor, cfg.h_min, cfg.h_max);
    if (finite && worst <= cfg.lte_tol) {
        d.accept = true;
    } else if (h <= cfg.h_min * (1.0 + 1e-12)) {
        d.accept = true;
        d.floored = true;
    }
    return d;
}

Engine::Engine(Circuit c, SolverConfig cfg)
    : circuit_(std::move(c)),
      cfg_(cfg),
      graph_(ControlGraph::build(circuit_)),
      cache_(circuit_, RelaxationStamp{false, cfg.relaxation_conductance}),
      loop_warnings_(circuit_.states.size(), 0) {}

std::vector<bool> Engine::gates_from_signals(std::span<const double> signals) const {
    std::vector<double> levels = graph_.gate_values(circuit_, signals);
    std::vector<bool> g(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) g[i] = levels[i] > 0.5;
    return g;
}

StateSnapshot Engine::solve_point(double t, std::vector<double> states, std::vector<double> control_states,
                                  std::vector<bool> gates, const SwitchConfig& guess, std::vector<bool> pinned,
                                  std::span<const double> prev_x) {
    KnownInputs k{states, source_values(circuit_, t), {}};
    ConsistencyOptions opt;
    opt.gates = gates;
    opt.max_iterations = cfg_.consistency_iters_max;
    opt.relaxation = cfg_.relaxation;
    opt.kmax = cfg_.relaxation_kmax;
    opt.relaxation_iters_max = cfg_.relaxation_iters_max;
    opt.prev_x = prev_x;
    opt.hold = hold_;
    ConsistentSolution sol = consistent_solve(circuit_, cache_, guess, k, opt);
    if (sol.relaxed) ++relaxed_solves_;

    StateSnapshot s;
    s.t = t;
    s.states = std::move(states);
    s.control_states = std::move(control_states);
    s.x = std::move(sol.x);
    s.config = std::move(sol.config);
    s.gates = std::move(gates);
    s.pinned = std::move(pinned);
    if (s.pinned.size() != circuit_.states.size()) s.pinned.assign(circuit_.states.size(), false);

    std::vector<double> feedback;
    feedback.reserve(circuit_.meters.size());
    for (std::size_t m : circuit_.meters) feedback.push_back(s.x[circuit_.meter_unknown(circuit_.elements[m])]);
    ControlEvaluation ev = graph_.evaluate(t, s.control_states, feedback);
    s.signals = std::move(ev.signals);
    s.derivatives = state_derivatives(circuit_, s.x, s.pinned);
    s.derivatives.insert(s.derivatives.end(), ev.derivatives.begin(), ev.derivatives.end());
    return s;
}

StateSnapshot Engine::initial_snapshot() {
    std::vector<double> states(circuit_.states.size(), 0.0);
    for (std::size_t i = 0; i < states.size(); ++i) {
        states[i] = circuit_.elements[circuit_.states[i]].initial.value_or(0.0);
    }
    StateSnapshot s = solve_point(0.0, std::move(states), graph_.initial_states(),
                                  std::vector<bool>(circuit_.switches.size(), false),
                                  SwitchConfig(circuit_.switches.size()), {}, {});
    finalize(s);
    return s;
}

void Engine::finalize(StateSnapshot& snap, std::vector<EventRecord>* events) {
    for (int iter = 0; iter < 4; ++iter) {
        std::vector<bool> g = gates_from_signals(snap.signals);
        if (g == snap.gates) break;
        if (events) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (g[i] != snap.gates[i]) {
                    events->push_back({EventKind::gate_edge, snap.t, snap.t, circuit_.elements[circuit_.switches[i]].name,
                                       g[i] ? 1.0 : 0.0, g[i] ? "gate on" : "gate off"});
                }
            }
        }
        snap = solve_point(snap.t, snap.states, snap.control_states, std::move(g), snap.config, snap.pinned, snap.x);
    }
    if (!cfg_.turnoff_substitution) return;
    std::vector<double> states = snap.states;
    std::vector<bool> mask = apply_turnoff_substitution(circuit_, snap.config, snap.x, states);
    if (mask != snap.pinned || states != snap.states) {
        snap = solve_point(snap.t, std::move(states), snap.control_states, snap.gates, snap.config, std::move(mask),
                           snap.x);
    }
}

namespace {

void split_clamped(const ControlGraph& g, std::span<const double> y, std::size_t ne, std::vector<double>& e,
                   std::vector<double>& cst) {
    e.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(ne));
    cst.assign(y.begin() + static_cast<std::ptrdiff_t>(ne), y.end());
    g.clamp_states(cst);
}

}  // namespace

StateSnapshot Engine::fe_step(const StateSnapshot& snap, double h) {
    const std::size_t ne = snap.states.size();
    std::vector<double> y(snap.states);
    y.insert(y.end(), snap.control_states.begin(), snap.control_states.end());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += h * snap.derivatives[i];
    std::vector<double> e, cst;
    split_clamped(graph_, y, ne, e, cst);
    return solve_point(snap.t + h, std::move(e), std::move(cst), snap.gates, snap.config, snap.pinned, snap.x);
}

RkfStepResult Engine::rkf_step(const StateSnapshot& snap, double h,
                              std::optional<std::pair<std::size_t, bool>> hold) {
    struct Restore {
        std::optional<std::pair<std::size_t, bool>>& slot;
        std::optional<std::pair<std::size_t, bool>> saved;
        ~Restore() { slot = saved; }
    } restore{hold_, hold_};
    hold_ = hold;
    const RkfTableau& tab = RkfTableau::fehlberg();
    const std::size_t ne = snap.states.size();
    std::vector<double> base(snap.states);
    base.insert(base.end(), snap.control_states.begin(), snap.control_states.end());
    const std::size_t n = base.size();

    std::array<std::vector<double>, 6> k;
    k[0].resize(n);
    for (std::size_t i = 0; i < n; ++i) k[0][i] = h * snap.derivatives[i];

    std::vector<bool> turned_off(snap.config.size(), false);
    std::vector<bool> turned_on(snap.config.size(), false);
    auto note_config = [&](const SwitchConfig& cfg) {
        for (std::size_t i = 0; i < cfg.size(); ++i) {
            if (circuit_.elements[circuit_.switches[i]].kind != ElementKind::diode) continue;
            if (snap.config[i] && !cfg[i]) turned_off[i] = true;
            if (!snap.config[i] && cfg[i]) turned_on[i] = true;
        }
    };
    SwitchConfig guess = snap.config;
    std::vector<double> prev_x = snap.x;
    std::vector<double> y(n), e, cst;
    for (std::size_t m = 1; m < 6; ++m) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = base[i];
            for (std::size_t j = 0; j < m; ++j) v += tab.beta[m][j] * k[j][i];
            y[i] = v;
        }
        split_clamped(graph_, y, ne, e, cst);
        StateSnapshot p = solve_point(snap.t + tab.alpha[m] * h, e, cst, snap.gates, guess, snap.pinned, prev_x);
        guess = p.config;
        note_config(guess);
        prev_x = std::move(p.x);
        k[m].resize(n);
        for (std::size_t i = 0; i < n; ++i) k[m][i] = h * p.derivatives[i];
    }

    std::vector<double> y4(base), y5(base);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            y4[i] += tab.gamma4[j] * k[j][i];
            y5[i] += tab.gamma5[j] * k[j][i];
        }
    }
    std::vector<double> e4, c4;
    split_clamped(graph_, y4, ne, e4, c4);
    split_clamped(graph_, y5, ne, e, cst);

    RkfStepResult r;
    r.lte.resize(n);
    for (std::size_t i = 0; i < ne; ++i) r.lte[i] = std::abs(e[i] - e4[i]);
    for (std::size_t i = 0; i < cst.size(); ++i) r.lte[ne + i] = std::abs(cst[i] - c4[i]);
    r.candidate = solve_point(snap.t + h, std::move(e), std::move(cst), snap.gates, guess, snap.pinned, prev_x);
    note_config(r.candidate.config);
    r.turned_off = std::move(turned_off);
    r.turned_on = std::move(turned_on);
    return r;
}

void Engine::accept_point(SimulationResult& r, StateSnapshot snap, bool detect_diode_events) {
    if (!r.points.empty()) {
        const StateSnapshot& prev = r.points.back();
        const bool gate_edge = prev.gates != snap.gates;
        for (std::size_t i = 0; i < circuit_.switches.size(); ++i) {
            const Element& e = circuit_.elements[circuit_.switches[i]];
            if (!detect_diode_events || e.kind != ElementKind::diode || prev.config[i] == snap.config[i]) continue;
            if (snap.config[i]) {
                r.events.push_back({EventKind::diode_turnon, prev.t, snap.t, e.name, element_current(circuit_, snap.x, e),
                                    "diode on"});
            } else {
                r.events.push_back({EventKind::diode_turnoff, prev.t, snap.t, e.name,
                                    element_current(circuit_, prev.x, e),
                                    gate_edge ? "diode off (commutated by gate edge)" : "diode off (not bisected)"});
            }
        }
        const double h = snap.t - prev.t;
        if (h > 0.0 && (r.stats.h_smallest == 0.0 || h < r.stats.h_smallest)) r.stats.h_smallest = h;
    }
    for (auto& w : monitor_inductor_loop(circuit_, snap.x, snap.t, cfg_.loop_voltage_warn)) {
        const std::size_t st = *circuit_.elements[*circuit_.find_element(w.ref)].state;
        if (loop_warnings_[st]++ == 0) r.events.push_back(std::move(w));
    }
    r.points.push_back(std::move(snap));
}

void Engine::fill_stats(SimulationResult& r) const {
    r.stats.assemblies = cache_.assemblies();
    r.stats.distinct_configs = cache_.distinct_configs();
    r.stats.solves = cache_.solves();
    r.stats.relaxed_solves = relaxed_solves_;
    for (std::size_t st = 0; st < loop_warnings_.size(); ++st) {
        if (loop_warnings_[st] > 1) {
            const Element& e = circuit_.elements[circuit_.states[st]];
            r.events.push_back({EventKind::warning, 0.0, r.points.empty() ? 0.0 : r.points.back().t, e.name,
                                static_cast<double>(loop_warnings_[st]),
                                "inductor loop voltage exceeded the threshold at " +
                                    std::to_string(loop_warnings_[st]) + " accepted points"});
        }
    }
}

SimulationResult Engine::run(Method m) {
    cfg_.validate(m);
    return m == Method::fe ? run_fe() : run_rkf();
}

namespace {

/// Tracks runs of strictly alternating-sign first differences of one signal.
class AlternationDetector {
public:
    /// Returns true once when the run length first reaches `threshold`.
    bool push(double v, std::size_t threshold) {
        if (has_last_) {
            const double d = v - last_;
            const int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
            if (sign != 0 && sign == -last_sign_) {
                ++run_;
            } else {
                run_ = sign != 0 ? 1 : 0;
                reported_ = false;
            }
            last_sign_ = sign;
        }
        last_ = v;
        has_last_ = true;
        if (run_ >= threshold && !reported_) {
            reported_ = true;
            return true;
        }
        return false;
    }
    std::size_t run() const { return run_; }

private:
    double last_ = 0.0;
    bool has_last_ = false;
    int last_sign_ = 0;
    std::size_t run_ = 0;
    bool reported_ = false;
};

constexpr std::size_t kOscillationRun = 10;

}  // namespace

SimulationResult Engine::run_fe() {
    SimulationResult r;
    StateSnapshot snap = initial_snapshot();
    std::vector<std::size_t> diodes;
    for (std::size_t i = 0; i < circuit_.switches.size(); ++i) {
        if (circuit_.elements[circuit_.switches[i]].kind == ElementKind::diode) diodes.push_back(i);
    }
    std::vector<AlternationDetector> detectors(diodes.size());
    auto watch = [&](const StateSnapshot& s) {
        for (std::size_t d = 0; d < diodes.size(); ++d) {
            const Element& e = circuit_.elements[circuit_.switches[diodes[d]]];
            if (detectors[d].push(element_current(circuit_, s.x, e), kOscillationRun)) {
                r.events.push_back({EventKind::warning, s.t, s.t, e.name, static_cast<double>(kOscillationRun),
                                    "numerical instability: diode current alternates in sign over " +
                                        std::to_string(kOscillationRun) + " consecutive steps"});
            }
        }
    };
    watch(snap);
    accept_point(r, snap);
    const auto steps = static_cast<std::size_t>(std::ceil(cfg_.t_end / cfg_.h - 1e-9));
    for (std::size_t n = 1; n <= steps; ++n) {
        if (cfg_.max_steps && r.stats.accepted >= cfg_.max_steps) {
            r.completed = false;
            r.events.push_back({EventKind::warning, snap.t, snap.t, "", 0.0, "step limit reached"});
            break;
        }
        const double target = std::min(static_cast<double>(n) * cfg_.h, cfg_.t_end);
        StateSnapshot next = fe_step(snap, target - snap.t);
        next.t = target;
        finalize(next, &r.events);
        watch(next);
        snap = next;
        accept_point(r, std::move(next));
        ++r.stats.accepted;
    }
    fill_stats(r);
    return r;
}

SimulationResult Engine::run_rkf() {
    SimulationResult r;
    StateSnapshot snap = initial_snapshot();
    accept_point(r, snap);
    std::vector<double> prev_signals;
    double prev_t = 0.0;
    const std::vector<double> step_times = graph_.step_times();
    double h = std::clamp(cfg_.h_init, cfg_.h_min, cfg_.h_max);
    const double t_end = cfg_.t_end;

    auto advance_prev = [&](const StateSnapshot& s) {
        prev_signals = s.signals;
        prev_t = s.t;
    };

    while (snap.t < t_end) {
        if (cfg_.max_steps && r.stats.accepted >= cfg_.max_steps) {
            r.completed = false;
            std::ostringstream os;
            os << "step limit reached; smallest step " << r.stats.h_smallest << " s";
            r.events.push_back({EventKind::warning, snap.t, snap.t, "", r.stats.h_smallest, os.str()});
            break;
        }
        double target = std::min(snap.t + h, t_end);
        bool truncated = target < snap.t + h;
        for (double ts : step_times) {
            if (ts > snap.t && ts < target) {
                target = ts;
                truncated = true;
            }
        }
        // Absorb a rounding-sized gap to the next scheduled point.
        const double slack = 1e-6 * (target - snap.t);
        if (t_end > target && t_end - target <= slack) target = t_end;
        for (double ts : step_times) {
            if (ts > target && ts - target <= slack) target = ts;
        }
        if (cfg_.crossover_planner && !graph_.comparators().empty()) {
            if (auto plan = plan_crossover_points(graph_, snap.t, target - snap.t, snap.signals, prev_signals, prev_t,
                                                  cfg_.event_dt)) {
                target = plan->t_limit;
                truncated = true;
                ++r.stats.planner_truncations;
                if (plan->crossing) {
                    const auto& cmp = graph_.comparators()[plan->comparator];
                    r.events.push_back({EventKind::comparator_crossover, snap.t, target,
                                        graph_.signal_names()[cmp.output], plan->t_cross, "predicted crossing"});
                }
            }
        }
        const double hs = target - snap.t;
        RkfStepResult res = rkf_step(snap, hs);
        StepDecision dec = adapt_step(res.lte, hs, cfg_);

        // A diode changing state inside the step makes its error estimate
        // meaningless, so events are handled before the accept test and the
        // truncated step is tested on its own.
        std::optional<std::pair<std::size_t, bool>> event;  // slot, state before the event
        if (cfg_.turnoff_bisection) {
            for (std::size_t i = 0; i < circuit_.switches.size() && !event; ++i) {
                const Element& e = circuit_.elements[circuit_.switches[i]];
                if (e.kind != ElementKind::diode) continue;
                if (res.turned_off[i] && element_current(circuit_, snap.x, e) > 0.0) event = {i, true};
            }
            for (std::size_t i = 0; i < circuit_.switches.size() && !event; ++i) {
                const Element& e = circuit_.elements[circuit_.switches[i]];
                if (e.kind != ElementKind::diode) continue;
                if (res.turned_on[i] && element_voltage(circuit_, snap.x, e) < e.von) event = {i, false};
            }
        }

        if (event) {
            const auto [slot, was_on] = *event;
            const Element& d = circuit_.elements[circuit_.switches[slot]];
            // Distance to the event: diode current while on, Von - V while off.
            auto distance = [&](std::span<const double> x) {
                return was_on ? element_current(circuit_, x, d) : d.von - element_voltage(circuit_, x, d);
            };
            std::optional<RkfStepResult> lo_res;
            std::optional<RkfStepResult> hi_res;
            auto trial = [&](double tau) -> TurnoffTrial {
                if (tau == 0.0) return {true, distance(snap.x)};
                RkfStepResult t = rkf_step(snap, tau, *event);
                const double dist = distance(t.candidate.x);
                TurnoffTrial out{dist >= 0.0, dist};
                (out.on ? lo_res : hi_res) = std::move(t);
                return out;
            };
            TurnoffBracket br;
            bool bisected = false;
            const TurnoffTrial whole = trial(hs);
            if (whole.on) {
                // Held in its state, the diode stays consistent over the whole step.
                res = std::move(*lo_res);
                dec = adapt_step(res.lte, hs, cfg_);
            } else {
                bisected = true;
                try {
                    br = bisect_diode_turnoff(hs, cfg_.event_dt, trial,
                                              was_on ? 1e-12 : std::numeric_limits<double>::infinity());
                } catch (const EventError& ex) {
                    bisected = false;
                    r.events.push_back({EventKind::warning, snap.t, target, d.name, 0.0, ex.what()});
                }
            }
            if (bisected) {
                const double t0 = snap.t;
                if (br.lo > 0.0) {
                    StepDecision lo_dec = adapt_step(lo_res->lte, br.lo, cfg_);
                    if (!lo_dec.accept) {
                        ++r.stats.rejected;
                        h = lo_dec.h_next;
                        continue;
                    }
                    StateSnapshot before = std::move(lo_res->candidate);
                    before.t = t0 + br.lo;
                    finalize(before, &r.events);
                    advance_prev(snap);
                    snap = before;
                    accept_point(r, std::move(before));
                    ++r.stats.accepted;
                }
                StateSnapshot& h_end = hi_res->candidate;
                SwitchConfig guess = h_end.config;
                guess.set(slot, !was_on);
                StateSnapshot after = solve_point(std::max(snap.t, t0 + br.hi), h_end.states, h_end.control_states,
                                                  h_end.gates, guess, h_end.pinned, h_end.x);
                std::string how = "bisected: " + std::to_string(br.time_iterations) + " time halvings";
                if (was_on) how += ", " + std::to_string(br.current_iterations) + " current halvings";
                r.events.push_back({was_on ? EventKind::diode_turnoff : EventKind::diode_turnon, snap.t, after.t,
                                    d.name, br.current_lo, how});
                ++r.stats.bisections;
                r.stats.max_bisection_time_iterations =
                    std::max(r.stats.max_bisection_time_iterations, br.time_iterations);
                r.stats.max_bisection_current_iterations =
                    std::max(r.stats.max_bisection_current_iterations, br.current_iterations);
                finalize(after, &r.events);
                advance_prev(snap);
                snap = after;
                accept_point(r, std::move(after), false);
                ++r.stats.accepted;
                h = std::max(dec.h_next, std::min(h, cfg_.h_max));
                continue;
            }
        }

        if (!dec.accept) {
            ++r.stats.rejected;
            h = dec.h_next;
            continue;
        }
        if (dec.floored) {
            ++r.stats.floored;
            r.events.push_back({EventKind::warning, snap.t, target, "", hs,
                                "step accepted at h_min with local error above tolerance"});
        }
        StateSnapshot next = std::move(res.candidate);
        next.t = target;
        finalize(next, &r.events);
        advance_prev(snap);
        snap = next;
        accept_point(r, std::move(next));
        ++r.stats.accepted;
        const double saved = h;
        h = dec.h_next;
        if (truncated) h = std::min(cfg_.h_max, std::max(h, saved));
    }
    fill_stats(r);
    return r;
}

std::vector<std::string> Engine::column_names() const {
    std::vector<std::string> names = circuit_.unknown_labels();
    for (std::size_t st : circuit_.states) {
        const Element& e = circuit_.elements[st];
        names.push_back((e.kind == ElementKind::capacitor ? "vC(" : "iL(") + e.name + ")");
    }
    for (const auto& s : graph_.state_names()) names.push_back("state(" + s + ")");
    for (std::size_t i = circuit_.meters.size(); i < graph_.signal_names().size(); ++i) {
        names.push_back(graph_.signal_names()[i]);
    }
    return names;
}

std::vector<double> Engine::columns(const StateSnapshot& s) const {
    std::vector<double> v(s.x);
    v.insert(v.end(), s.states.begin(), s.states.end());
    v.insert(v.end(), s.control_states.begin(), s.control_states.end());
    for (std::size_t i = circuit_.meters.size(); i < s.signals.size(); ++i) v.push_back(s.signals[i]);
    return v;
}

}  // namespace elex
