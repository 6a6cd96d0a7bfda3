#include "elexsim/assembly.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "elexsim/error.hpp"

namespace elex {

std::string SwitchConfig::to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (bool b : bits) s.push_back(b ? '1' : '0');
    return s;
}

namespace {

void stamp_voltage(const Circuit& c, DenseMatrix& a, std::size_t row, const Element& e, double scale) {
    if (auto i = c.voltage_unknown(e.nodes[0])) a(row, *i) += scale;
    if (auto i = c.voltage_unknown(e.nodes[1])) a(row, *i) -= scale;
}

}  // namespace

LinearSystem assemble(const Circuit& c, const SwitchConfig& s, RelaxationStamp relax) {
    if (s.size() != c.switches.size()) throw ParameterError("assemble: switch configuration has wrong length");
    const std::size_t n = c.unknown_count();
    LinearSystem sys;
    sys.a = DenseMatrix(n, n);
    sys.relaxed = relax.enabled;
    auto& a = sys.a;

    for (std::size_t node = 1; node < c.node_count(); ++node) {
        sys.row_labels.push_back("KCL " + c.node_names[node]);
    }
    for (const auto& e : c.elements) {
        const std::size_t j = c.current_unknown(e);
        if (auto r = c.voltage_unknown(e.nodes[0])) a(*r, j) += 1.0;
        if (auto r = c.voltage_unknown(e.nodes[1])) a(*r, j) -= 1.0;
    }

    std::size_t row = c.node_count() - 1;
    for (const auto& e : c.elements) {
        const std::size_t j = c.current_unknown(e);
        sys.row_labels.push_back(e.name);
        switch (e.kind) {
            case ElementKind::dc_source:
            case ElementKind::sine_source:
            case ElementKind::capacitor:
                stamp_voltage(c, a, row, e, 1.0);
                break;
            case ElementKind::resistor:
                a(row, j) = 1.0;
                stamp_voltage(c, a, row, e, -1.0 / e.value);
                break;
            case ElementKind::inductor:
                a(row, j) = 1.0;
                if (e.parallel_rp > 0.0) stamp_voltage(c, a, row, e, -1.0 / e.parallel_rp);
                break;
            case ElementKind::diode:
            case ElementKind::controlled_switch:
                if (s[*e.switch_slot]) {
                    stamp_voltage(c, a, row, e, 1.0);
                } else {
                    a(row, j) = 1.0;
                    if (relax.enabled && e.kind == ElementKind::controlled_switch) {
                        stamp_voltage(c, a, row, e, -relax.conductance);
                    }
                }
                break;
            case ElementKind::ammeter:
                stamp_voltage(c, a, row, e, 1.0);
                ++row;
                sys.row_labels.push_back(e.name + ":out");
                a(row, j) = 1.0;
                a(row, c.meter_unknown(e)) = -1.0;
                break;
            case ElementKind::voltmeter:
                a(row, j) = 1.0;
                ++row;
                sys.row_labels.push_back(e.name + ":out");
                stamp_voltage(c, a, row, e, 1.0);
                a(row, c.meter_unknown(e)) = -1.0;
                break;
        }
        ++row;
    }
    sys.factors = lu_factor(a);
    sys.singular = sys.factors.singular;
    return sys;
}

std::vector<double> build_rhs(const Circuit& c, const SwitchConfig& s, const KnownInputs& k) {
    if (k.states.size() != c.states.size() || k.sources.size() != c.sources.size() ||
        (!k.injections.empty() && k.injections.size() != c.switches.size())) {
        throw ParameterError("build_rhs: known inputs do not match the circuit");
    }
    std::vector<double> b(c.unknown_count(), 0.0);
    std::size_t row = c.node_count() - 1;
    for (const auto& e : c.elements) {
        switch (e.kind) {
            case ElementKind::dc_source:
            case ElementKind::sine_source: b[row] = k.sources[*e.source]; break;
            case ElementKind::capacitor:
            case ElementKind::inductor: b[row] = k.states[*e.state]; break;
            case ElementKind::diode:
            case ElementKind::controlled_switch:
                if (s[*e.switch_slot]) {
                    b[row] = e.von;
                } else if (!k.injections.empty()) {
                    b[row] = -k.injections[*e.switch_slot];
                }
                break;
            case ElementKind::ammeter:
            case ElementKind::voltmeter: ++row; break;
            case ElementKind::resistor: break;
        }
        ++row;
    }
    return b;
}

std::vector<double> source_values(const Circuit& c, double t) {
    std::vector<double> v(c.sources.size());
    for (std::size_t i = 0; i < c.sources.size(); ++i) {
        const auto& e = c.elements[c.sources[i]];
        v[i] = e.kind == ElementKind::dc_source
                   ? e.value
                   : e.value * std::sin(2.0 * std::numbers::pi * e.frequency * t + e.phase);
    }
    return v;
}

double relaxation_injection(double v1, double v2, int k, int kmax, double conductance) {
    if (kmax < 2) throw ParameterError("relaxation: kmax must be at least 2");
    if (k < 1 || k > kmax) throw ParameterError("relaxation: k must lie in [1, kmax]");
    if (!(conductance > 0.0)) throw ParameterError("relaxation: conductance must be positive");
    return static_cast<double>(k - 1) / static_cast<double>(kmax - 1) * conductance * (v1 - v2);
}

std::vector<bool> isolated_inductors(const Circuit& c, const SwitchConfig& s) {
    std::vector<bool> out(c.states.size(), false);
    for (std::size_t st = 0; st < c.states.size(); ++st) {
        const auto& l = c.elements[c.states[st]];
        if (l.kind != ElementKind::inductor || l.parallel_rp == 0.0) continue;
        std::vector<std::size_t> parent(c.node_count());
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& e : c.elements) {
            if (&e == &l || e.kind == ElementKind::voltmeter) continue;
            if (e.is_switching() && !s[*e.switch_slot]) continue;
            parent[find(e.nodes[0].index)] = find(e.nodes[1].index);
        }
        out[st] = find(l.nodes[0].index) != find(l.nodes[1].index);
    }
    return out;
}

const LinearSystem& MatrixCache::get(const SwitchConfig& s) {
    auto it = plain_.find(s);
    if (it == plain_.end()) {
        it = plain_.emplace(s, assemble(*circuit_, s)).first;
        ++assemblies_;
    }
    return it->second;
}

const LinearSystem& MatrixCache::get_relaxed(const SwitchConfig& s) {
    auto it = relaxed_.find(s);
    if (it == relaxed_.end()) {
        RelaxationStamp r = relax_;
        r.enabled = true;
        it = relaxed_.emplace(s, assemble(*circuit_, s, r)).first;
        ++assemblies_;
    }
    return it->second;
}

std::vector<double> MatrixCache::solve(const SwitchConfig& s, std::span<const double> b, bool relaxed) {
    const LinearSystem& sys = relaxed ? get_relaxed(s) : get(s);
    if (sys.singular) throw SingularityError("singular system matrix for switch configuration " + s.to_string());
    ++solves_;
    return lu_solve(sys.factors, b);
}

}  // namespace elex
