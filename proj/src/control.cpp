#include "elexsim/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "elexsim/error.hpp"

namespace elex {

FilterDecomposition decompose_filter(double kc, double wz, double wp) {
    if (!(wz > 0.0) || !(wp > 0.0)) throw ParameterError("filter: wz and wp must be positive");
    FilterDecomposition d;
    d.k = 1.0 - wp / wz;
    d.feedthrough = kc * (wp / wz);
    d.state_path_gain = kc * d.k;
    d.pole = wp;
    return d;
}

double carrier_value(BlockKind kind, double min, double max, double f, double t) {
    double phase = f * t;
    const double nearest = std::round(phase);
    if (std::abs(phase - nearest) <= 1e-9) phase = nearest;
    const double frac = phase - std::floor(phase);
    if (kind == BlockKind::sawtooth) return min + (max - min) * frac;
    const double tri = frac < 0.5 ? 2.0 * frac : 2.0 - 2.0 * frac;
    return min + (max - min) * tri;
}

double integrator_stage_update(double state_n, std::span<const double> k, std::span<const double> beta_row,
                               double out_min, double out_max) {
    double v = state_n;
    for (std::size_t j = 0; j < beta_row.size() && j < k.size(); ++j) v += beta_row[j] * k[j];
    return std::clamp(v, out_min, out_max);
}

namespace {

bool is_source(BlockKind k) {
    switch (k) {
        case BlockKind::constant:
        case BlockKind::sine:
        case BlockKind::triangle:
        case BlockKind::sawtooth:
        case BlockKind::step:
        case BlockKind::integrator: return true;
        default: return false;
    }
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

ControlGraph ControlGraph::build(const Circuit& c) {
    ControlGraph g;
    auto add_signal = [&](const std::string& name) {
        if (!g.signal_lookup_.emplace(name, g.signal_names_.size()).second) {
            throw GraphError("duplicate control signal '" + name + "'");
        }
        g.signal_names_.push_back(name);
        return g.signal_names_.size() - 1;
    };
    for (std::size_t m : c.meters) add_signal(c.elements[m].signal);
    g.feedback_count_ = c.meters.size();

    for (const auto& spec : c.control) {
        Node n;
        n.spec = spec;
        n.output = add_signal(spec.name);
        if (!spec.complement.empty()) n.complement = add_signal(spec.complement);
        g.blocks_.push_back(std::move(n));
    }
    for (std::size_t b = 0; b < g.blocks_.size(); ++b) {
        Node& n = g.blocks_[b];
        for (const auto& in : n.spec.inputs) {
            auto it = g.signal_lookup_.find(in);
            if (it == g.signal_lookup_.end()) {
                throw GraphError("block '" + n.spec.name + "' reads unknown signal '" + in + "'");
            }
            n.inputs.push_back(it->second);
        }
        if (n.spec.kind == BlockKind::integrator || n.spec.kind == BlockKind::filter) {
            n.state = g.state_names_.size();
            g.state_names_.push_back(n.spec.name + (n.spec.kind == BlockKind::filter ? ".s" : ""));
            g.state_block_.push_back(b);
        }
        if (n.spec.kind == BlockKind::filter) {
            n.filter = decompose_filter(n.spec.param("kc", 1.0), n.spec.param("wz", 1.0), n.spec.param("wp", 1.0));
        }
        if (n.spec.kind == BlockKind::integrator && !(n.spec.param("min", -kInf) < n.spec.param("max", kInf))) {
            throw ParameterError("integrator '" + n.spec.name + "' needs min < max");
        }
        if (n.spec.kind == BlockKind::triangle || n.spec.kind == BlockKind::sawtooth) {
            CarrierInfo ci{b, n.output, n.spec.kind, n.spec.param("min", 0.0), n.spec.param("max", 1.0),
                           n.spec.param("f", 0.0)};
            if (!(ci.f > 0.0)) throw ParameterError("carrier '" + n.spec.name + "' needs f > 0");
            g.carriers_.push_back(ci);
        }
        if (n.spec.kind == BlockKind::comparator) {
            g.comparators_.push_back({b, n.inputs[0], n.inputs[1], n.output});
        }
    }

    std::vector<bool> fresh(g.signal_names_.size(), false);
    for (std::size_t i = 0; i < g.feedback_count_; ++i) fresh[i] = true;
    std::vector<bool> fired(g.blocks_.size(), false);
    auto mark = [&](const Node& n) {
        fresh[n.output] = true;
        if (n.complement) fresh[*n.complement] = true;
    };
    for (std::size_t b = 0; b < g.blocks_.size(); ++b) {
        if (is_source(g.blocks_[b].spec.kind)) {
            g.sources_.push_back(b);
            fired[b] = true;
        }
    }
    for (std::size_t b : g.sources_) mark(g.blocks_[b]);
    std::size_t remaining = g.blocks_.size() - g.sources_.size();
    while (remaining > 0) {
        std::vector<std::size_t> pass;
        for (std::size_t b = 0; b < g.blocks_.size(); ++b) {
            if (fired[b]) continue;
            const auto& ins = g.blocks_[b].inputs;
            if (std::all_of(ins.begin(), ins.end(), [&](std::size_t i) { return fresh[i]; })) pass.push_back(b);
        }
        if (pass.empty()) {
            std::string names;
            for (std::size_t b = 0; b < g.blocks_.size(); ++b) {
                if (!fired[b]) names += (names.empty() ? "" : ", ") + g.blocks_[b].spec.name;
            }
            throw GraphError("algebraic loop among control blocks: " + names);
        }
        for (std::size_t b : pass) {
            fired[b] = true;
            mark(g.blocks_[b]);
        }
        remaining -= pass.size();
        g.schedule_.push_back(std::move(pass));
    }

    for (std::size_t sw : c.switches) {
        const auto& e = c.elements[sw];
        if (e.kind == ElementKind::controlled_switch && !g.signal_lookup_.contains(e.signal)) {
            throw GraphError("switch '" + e.name + "' gate '" + e.signal + "' is not a control signal");
        }
    }
    return g;
}

std::optional<std::size_t> ControlGraph::signal_index(std::string_view name) const {
    auto it = signal_lookup_.find(std::string(name));
    if (it == signal_lookup_.end()) return std::nullopt;
    return it->second;
}

std::vector<double> ControlGraph::initial_states() const {
    std::vector<double> s(state_names_.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = blocks_[state_block_[i]].spec.param("ic", 0.0);
    clamp_states(s);
    return s;
}

std::vector<std::pair<double, double>> ControlGraph::state_bounds() const {
    std::vector<std::pair<double, double>> out;
    for (std::size_t b : state_block_) {
        const auto& spec = blocks_[b].spec;
        if (spec.kind == BlockKind::integrator) {
            out.emplace_back(spec.param("min", -kInf), spec.param("max", kInf));
        } else {
            out.emplace_back(-kInf, kInf);
        }
    }
    return out;
}

void ControlGraph::clamp_states(std::span<double> states) const {
    const auto bounds = state_bounds();
    for (std::size_t i = 0; i < states.size() && i < bounds.size(); ++i) {
        states[i] = std::clamp(states[i], bounds[i].first, bounds[i].second);
    }
}

ControlEvaluation ControlGraph::evaluate(double t, std::span<const double> states,
                                         std::span<const double> feedback) const {
    if (states.size() != state_names_.size()) throw ParameterError("control: wrong number of states");
    if (feedback.size() != feedback_count_) throw ParameterError("control: wrong number of feedback signals");
    ControlEvaluation ev;
    ev.signals.assign(signal_names_.size(), 0.0);
    ev.derivatives.assign(state_names_.size(), 0.0);
    auto& sig = ev.signals;
    std::copy(feedback.begin(), feedback.end(), sig.begin());

    auto fire = [&](const Node& n) {
        const auto& p = n.spec;
        auto in = [&](std::size_t i) { return sig[n.inputs[i]]; };
        double y = 0.0;
        switch (p.kind) {
            case BlockKind::constant: y = p.param("v", 0.0); break;
            case BlockKind::sine:
                y = p.param("im", 0.0) * std::sin(2.0 * std::numbers::pi * p.param("f", 0.0) * t + p.param("phase", 0.0));
                break;
            case BlockKind::triangle:
            case BlockKind::sawtooth:
                y = carrier_value(p.kind, p.param("min", 0.0), p.param("max", 1.0), p.param("f", 1.0), t);
                break;
            case BlockKind::step: y = t < p.param("t", 0.0) ? p.param("v0", 0.0) : p.param("v1", 0.0); break;
            case BlockKind::sum:
                for (std::size_t i = 0; i < n.inputs.size(); ++i) y += p.signs[i] == '-' ? -in(i) : in(i);
                break;
            case BlockKind::gain: y = p.param("k", 1.0) * in(0); break;
            case BlockKind::comparator: y = in(0) > in(1) ? 1.0 : 0.0; break;
            case BlockKind::integrator:
                y = std::clamp(states[*n.state], p.param("min", -kInf), p.param("max", kInf));
                break;
            case BlockKind::filter: y = n.filter.feedthrough * in(0) + n.filter.state_path_gain * states[*n.state]; break;
        }
        sig[n.output] = y;
        if (n.complement) sig[*n.complement] = 1.0 - y;
    };

    for (std::size_t b : sources_) fire(blocks_[b]);
    for (const auto& pass : schedule_) {
        for (std::size_t b : pass) fire(blocks_[b]);
    }
    ev.passes = schedule_.size();

    for (std::size_t i = 0; i < state_block_.size(); ++i) {
        const Node& n = blocks_[state_block_[i]];
        const double u = sig[n.inputs[0]];
        if (n.spec.kind == BlockKind::integrator) {
            ev.derivatives[i] = n.spec.param("gain", 1.0) * u;
        } else {
            ev.derivatives[i] = n.filter.pole * (u - states[i]);
        }
    }
    return ev;
}

std::vector<double> ControlGraph::gate_values(const Circuit& c, std::span<const double> signals) const {
    std::vector<double> g(c.switches.size(), 0.0);
    for (std::size_t i = 0; i < c.switches.size(); ++i) {
        const auto& e = c.elements[c.switches[i]];
        if (e.kind != ElementKind::controlled_switch) continue;
        auto it = signal_lookup_.find(e.signal);
        if (it == signal_lookup_.end()) throw GraphError("gate '" + e.signal + "' is not a control signal");
        g[i] = signals[it->second];
    }
    return g;
}

const CarrierInfo* ControlGraph::carrier_for_signal(std::size_t i) const {
    for (const auto& c : carriers_) {
        if (c.signal == i) return &c;
    }
    return nullptr;
}

std::vector<double> ControlGraph::step_times() const {
    std::vector<double> out;
    for (const auto& n : blocks_) {
        if (n.spec.kind == BlockKind::step) out.push_back(n.spec.param("t", 0.0));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace elex
