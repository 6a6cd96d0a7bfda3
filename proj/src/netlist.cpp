#include "elexsim/netlist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "elexsim/error.hpp"
#include "elexsim/units.hpp"

namespace elex {

std::string_view to_string(ElementKind kind) {
    switch (kind) {
        case ElementKind::resistor: return "r";
        case ElementKind::capacitor: return "c";
        case ElementKind::inductor: return "l";
        case ElementKind::dc_source: return "vdc";
        case ElementKind::sine_source: return "vsin";
        case ElementKind::diode: return "d";
        case ElementKind::controlled_switch: return "sw";
        case ElementKind::ammeter: return "am";
        case ElementKind::voltmeter: return "vm";
    }
    return "?";
}

std::string_view to_string(BlockKind kind) {
    switch (kind) {
        case BlockKind::constant: return "const";
        case BlockKind::sine: return "sine";
        case BlockKind::triangle: return "tri";
        case BlockKind::sawtooth: return "saw";
        case BlockKind::step: return "step";
        case BlockKind::sum: return "sum";
        case BlockKind::gain: return "gain";
        case BlockKind::comparator: return "cmp";
        case BlockKind::integrator: return "integ";
        case BlockKind::filter: return "filter";
    }
    return "?";
}

double BlockSpec::param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

std::optional<std::size_t> Circuit::find_element(std::string_view name) const {
    for (std::size_t i = 0; i < elements.size(); ++i) {
        if (elements[i].name == name) return i;
    }
    return std::nullopt;
}

std::optional<NodeId> Circuit::find_node(std::string_view name) const {
    for (std::size_t i = 0; i < node_names.size(); ++i) {
        if (node_names[i] == name) return NodeId{i};
    }
    return std::nullopt;
}

std::vector<std::string> Circuit::unknown_labels() const {
    std::vector<std::string> labels;
    labels.reserve(unknown_count());
    for (std::size_t n = 1; n < node_names.size(); ++n) labels.push_back("V(" + node_names[n] + ")");
    for (const auto& e : elements) labels.push_back("i(" + e.name + ")");
    for (std::size_t m : meters) labels.push_back(elements[m].signal);
    return labels;
}

// ---------------------------------------------------------------------------
// Builder

NodeId CircuitBuilder::node(const std::string& name) {
    for (std::size_t i = 0; i < node_names_.size(); ++i) {
        if (node_names_[i] == name) return NodeId{i};
    }
    node_names_.push_back(name);
    return NodeId{node_names_.size() - 1};
}

Element& CircuitBuilder::add(std::string name, ElementKind kind, const std::string& a, const std::string& b) {
    for (const auto& e : elements_) {
        if (e.name == name) throw ParseError(current_line_, "duplicate element name '" + name + "'");
    }
    if (a == b) throw ParseError(current_line_, "element '" + name + "' has both terminals on node " + a);
    Element e;
    e.name = std::move(name);
    e.kind = kind;
    e.nodes = {node(a), node(b)};
    elements_.push_back(std::move(e));
    lines_.push_back(current_line_);
    return elements_.back();
}

namespace {

void require_positive(std::size_t line, const std::string& name, const char* what, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ParseError(line, "element '" + name + "': " + what + " must be positive");
    }
}

}  // namespace

CircuitBuilder& CircuitBuilder::resistor(const std::string& name, const std::string& a, const std::string& b,
                                         double r) {
    require_positive(current_line_, name, "resistance", r);
    add(name, ElementKind::resistor, a, b).value = r;
    return *this;
}

CircuitBuilder& CircuitBuilder::capacitor(const std::string& name, const std::string& a, const std::string& b,
                                          double c, double r1, std::optional<double> ic) {
    require_positive(current_line_, name, "capacitance", c);
    if (r1 < 0.0) throw ParseError(current_line_, "element '" + name + "': r1 must be non-negative");
    if (r1 == 0.0) {
        auto& e = add(name, ElementKind::capacitor, a, b);
        e.value = c;
        e.initial = ic;
        return *this;
    }
    // C from a to an internal node, R1 from the internal node to b.
    const std::string internal = name + ".r1";
    for (const auto& n : node_names_) {
        if (n == internal) throw ParseError(current_line_, "internal node name '" + internal + "' already in use");
    }
    auto& e = add(name, ElementKind::capacitor, a, internal);
    e.value = c;
    e.series_r1 = r1;
    e.initial = ic;
    const std::size_t parent = elements_.size() - 1;
    auto& r = add(internal, ElementKind::resistor, internal, b);
    r.value = r1;
    r.generated_by = parent;
    return *this;
}

CircuitBuilder& CircuitBuilder::inductor(const std::string& name, const std::string& a, const std::string& b,
                                         double l, double rp, std::optional<double> ic) {
    require_positive(current_line_, name, "inductance", l);
    if (rp < 0.0) throw ParseError(current_line_, "element '" + name + "': rp must be non-negative");
    auto& e = add(name, ElementKind::inductor, a, b);
    e.value = l;
    e.parallel_rp = rp;
    e.initial = ic;
    return *this;
}

CircuitBuilder& CircuitBuilder::dc_source(const std::string& name, const std::string& a, const std::string& b,
                                          double v) {
    add(name, ElementKind::dc_source, a, b).value = v;
    return *this;
}

CircuitBuilder& CircuitBuilder::sine_source(const std::string& name, const std::string& a, const std::string& b,
                                            double vm, double f, double phase) {
    require_positive(current_line_, name, "frequency", f);
    auto& e = add(name, ElementKind::sine_source, a, b);
    e.value = vm;
    e.frequency = f;
    e.phase = phase;
    return *this;
}

CircuitBuilder& CircuitBuilder::diode(const std::string& name, const std::string& a, const std::string& b,
                                      double von) {
    if (von < 0.0) throw ParseError(current_line_, "element '" + name + "': von must be non-negative");
    add(name, ElementKind::diode, a, b).von = von;
    return *this;
}

CircuitBuilder& CircuitBuilder::controlled_switch(const std::string& name, const std::string& a,
                                                  const std::string& b, const std::string& gate) {
    if (gate.empty()) throw ParseError(current_line_, "switch '" + name + "' needs gate=<signal>");
    add(name, ElementKind::controlled_switch, a, b).signal = gate;
    return *this;
}

CircuitBuilder& CircuitBuilder::ammeter(const std::string& name, const std::string& a, const std::string& b,
                                        const std::string& out) {
    if (out.empty()) throw ParseError(current_line_, "ammeter '" + name + "' needs out=<signal>");
    add(name, ElementKind::ammeter, a, b).signal = out;
    return *this;
}

CircuitBuilder& CircuitBuilder::voltmeter(const std::string& name, const std::string& a, const std::string& b,
                                          const std::string& out) {
    if (out.empty()) throw ParseError(current_line_, "voltmeter '" + name + "' needs out=<signal>");
    add(name, ElementKind::voltmeter, a, b).signal = out;
    return *this;
}

CircuitBuilder& CircuitBuilder::block(BlockSpec spec) {
    for (const auto& b : control_) {
        if (b.name == spec.name) throw ParseError(current_line_, "duplicate control block '" + spec.name + "'");
    }
    control_.push_back(std::move(spec));
    return *this;
}

Circuit CircuitBuilder::build() const {
    Circuit c;
    c.node_names = node_names_;
    c.elements = elements_;
    c.control = control_;

    // Reference counting for ground / dangling checks.
    std::vector<std::size_t> refs(c.node_count(), 0);
    std::vector<bool> voltmeter_ref(c.node_count(), false);
    for (const auto& e : c.elements) {
        for (NodeId n : e.nodes) {
            ++refs[n.index];
            if (e.kind == ElementKind::voltmeter) voltmeter_ref[n.index] = true;
        }
    }
    if (refs[0] == 0) throw ParseError(0, "missing ground node '0'");
    for (std::size_t n = 1; n < c.node_count(); ++n) {
        if (refs[n] == 1 && !voltmeter_ref[n]) {
            std::size_t line = 0;
            for (std::size_t i = 0; i < c.elements.size(); ++i) {
                for (NodeId id : c.elements[i].nodes) {
                    if (id.index == n) line = lines_[i];
                }
            }
            throw ParseError(line, "dangling node '" + c.node_names[n] + "' has a single connection");
        }
    }

    std::set<std::string> signals;
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
        auto& e = c.elements[i];
        e.branch = i;
        switch (e.kind) {
            case ElementKind::capacitor:
            case ElementKind::inductor:
                e.state = c.states.size();
                c.states.push_back(i);
                break;
            case ElementKind::dc_source:
            case ElementKind::sine_source:
                e.source = c.sources.size();
                c.sources.push_back(i);
                break;
            case ElementKind::diode:
            case ElementKind::controlled_switch:
                e.switch_slot = c.switches.size();
                c.switches.push_back(i);
                break;
            case ElementKind::ammeter:
            case ElementKind::voltmeter:
                if (!signals.insert(e.signal).second) {
                    throw ParseError(lines_[i], "meter output '" + e.signal + "' defined twice");
                }
                e.meter = c.meters.size();
                c.meters.push_back(i);
                break;
            case ElementKind::resistor:
                break;
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream is{std::string(line)};
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

struct Params {
    std::map<std::string, std::string> values;
    std::size_t line;

    bool has(const std::string& k) const { return values.count(k) != 0; }

    double number(const std::string& k) const {
        auto it = values.find(k);
        if (it == values.end()) throw ParseError(line, "missing parameter " + k + "=");
        auto v = parse_si(it->second);
        if (!v) throw ParseError(line, "bad number '" + it->second + "' for " + k);
        return *v;
    }
    double number(const std::string& k, double fallback) const { return has(k) ? number(k) : fallback; }
    std::optional<double> optional(const std::string& k) const {
        if (!has(k)) return std::nullopt;
        return number(k);
    }
    std::string text(const std::string& k) const {
        auto it = values.find(k);
        return it == values.end() ? std::string{} : it->second;
    }
    void allow(std::initializer_list<const char*> keys) const {
        for (const auto& [k, v] : values) {
            bool ok = false;
            for (const char* a : keys) ok = ok || k == a;
            if (!ok) throw ParseError(line, "unknown parameter '" + k + "'");
        }
    }
};

// Splits tokens after the kind into positional words and key=value params.
std::pair<std::vector<std::string>, Params> split_args(const std::vector<std::string>& tokens, std::size_t first,
                                                       std::size_t line) {
    std::vector<std::string> positional;
    Params params{{}, line};
    for (std::size_t i = first; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            if (!params.values.empty()) throw ParseError(line, "positional argument '" + t + "' after parameters");
            positional.push_back(t);
        } else {
            if (eq == 0 || eq + 1 == t.size()) throw ParseError(line, "malformed parameter '" + t + "'");
            std::string key = t.substr(0, eq);
            for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            if (!params.values.emplace(key, t.substr(eq + 1)).second) {
                throw ParseError(line, "parameter '" + key + "' given twice");
            }
        }
    }
    return {positional, params};
}

void parse_element(CircuitBuilder& b, const std::vector<std::string>& tok, std::size_t line) {
    if (tok.size() < 2) throw ParseError(line, "expected 'name kind node node ...'");
    const std::string& name = tok[0];
    const std::string& kind = tok[1];
    auto [pos, p] = split_args(tok, 2, line);
    if (pos.size() != 2) throw ParseError(line, "element '" + name + "' needs exactly two nodes");
    const std::string &a = pos[0], &n = pos[1];
    if (kind == "r") {
        p.allow({"r"});
        b.resistor(name, a, n, p.number("r"));
    } else if (kind == "c") {
        p.allow({"c", "r1", "ic"});
        b.capacitor(name, a, n, p.number("c"), p.number("r1", 0.0), p.optional("ic"));
    } else if (kind == "l") {
        p.allow({"l", "rp", "ic"});
        b.inductor(name, a, n, p.number("l"), p.number("rp", 0.0), p.optional("ic"));
    } else if (kind == "vdc") {
        p.allow({"v"});
        b.dc_source(name, a, n, p.number("v"));
    } else if (kind == "vsin") {
        p.allow({"vm", "f", "phase"});
        b.sine_source(name, a, n, p.number("vm"), p.number("f"), p.number("phase", 0.0));
    } else if (kind == "d") {
        p.allow({"von"});
        b.diode(name, a, n, p.number("von", 0.0));
    } else if (kind == "sw") {
        p.allow({"gate"});
        b.controlled_switch(name, a, n, p.text("gate"));
    } else if (kind == "am") {
        p.allow({"out"});
        b.ammeter(name, a, n, p.text("out"));
    } else if (kind == "vm") {
        p.allow({"out"});
        b.voltmeter(name, a, n, p.text("out"));
    } else {
        throw ParseError(line, "unknown element kind '" + kind + "'");
    }
}

struct BlockGrammar {
    BlockKind kind;
    std::size_t min_inputs, max_inputs;
    std::vector<const char*> required;
    std::vector<const char*> optional;
};

const BlockGrammar* block_grammar(std::string_view kind) {
    static const std::vector<std::pair<std::string_view, BlockGrammar>> table = {
        {"const", {BlockKind::constant, 0, 0, {"v"}, {}}},
        {"sine", {BlockKind::sine, 0, 0, {"im", "f"}, {"phase"}}},
        {"tri", {BlockKind::triangle, 0, 0, {"f"}, {"min", "max"}}},
        {"saw", {BlockKind::sawtooth, 0, 0, {"f"}, {"min", "max"}}},
        {"step", {BlockKind::step, 0, 0, {"v0", "v1", "t"}, {}}},
        {"sum", {BlockKind::sum, 1, 64, {}, {"signs"}}},
        {"gain", {BlockKind::gain, 1, 1, {"k"}, {}}},
        {"cmp", {BlockKind::comparator, 2, 2, {}, {"comp"}}},
        {"integ", {BlockKind::integrator, 1, 1, {}, {"gain", "min", "max", "ic"}}},
        {"filter", {BlockKind::filter, 1, 1, {"kc", "wz", "wp"}, {"ic"}}},
    };
    for (const auto& [name, g] : table) {
        if (name == kind) return &g;
    }
    return nullptr;
}

BlockSpec parse_block(const std::vector<std::string>& tok, std::size_t line) {
    if (tok.size() < 2) throw ParseError(line, "expected 'name kind input... key=value...'");
    const BlockGrammar* g = block_grammar(tok[1]);
    if (!g) throw ParseError(line, "unknown control block kind '" + tok[1] + "'");
    auto [pos, p] = split_args(tok, 2, line);
    if (pos.size() < g->min_inputs || pos.size() > g->max_inputs) {
        throw ParseError(line, "block '" + tok[0] + "' has wrong number of inputs");
    }
    BlockSpec spec;
    spec.name = tok[0];
    spec.kind = g->kind;
    spec.inputs = pos;
    for (const auto& [k, v] : p.values) {
        bool known = false;
        for (const char* r : g->required) known = known || k == r;
        for (const char* o : g->optional) known = known || k == o;
        if (!known) throw ParseError(line, "unknown parameter '" + k + "' for block '" + spec.name + "'");
        if (k == "signs") {
            spec.signs = v;
        } else if (k == "comp") {
            spec.complement = v;
        } else {
            spec.params[k] = p.number(k);
        }
    }
    for (const char* r : g->required) {
        if (!p.has(r)) throw ParseError(line, "block '" + spec.name + "' needs " + r + "=");
    }
    if (spec.kind == BlockKind::sum) {
        if (spec.signs.empty()) spec.signs.assign(spec.inputs.size(), '+');
        if (spec.signs.size() != spec.inputs.size() ||
            spec.signs.find_first_not_of("+-") != std::string::npos) {
            throw ParseError(line, "block '" + spec.name + "': signs must have one +/- per input");
        }
    }
    if (spec.kind == BlockKind::triangle || spec.kind == BlockKind::sawtooth) {
        if (!(spec.param("f", 0.0) > 0.0)) throw ParseError(line, "carrier '" + spec.name + "' needs f > 0");
        if (!(spec.param("min", 0.0) < spec.param("max", 1.0))) {
            throw ParseError(line, "carrier '" + spec.name + "' needs min < max");
        }
    }
    if (spec.kind == BlockKind::integrator && spec.params.count("min") && spec.params.count("max") &&
        !(spec.params.at("min") < spec.params.at("max"))) {
        throw ParseError(line, "integrator '" + spec.name + "' needs min < max");
    }
    if (spec.kind == BlockKind::filter &&
        (!(spec.params.at("wz") > 0.0) || !(spec.params.at("wp") > 0.0))) {
        throw ParseError(line, "filter '" + spec.name + "' needs positive wz and wp");
    }
    return spec;
}

}  // namespace

Circuit parse_netlist(std::string_view text) {
    CircuitBuilder b;
    bool in_control = false;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto tok = split_ws(line);
        if (tok.empty()) {
            if (end == text.size()) break;
            continue;
        }
        b.current_line_ = line_no;
        if (tok.size() == 1 && tok[0] == "[control]") {
            if (in_control) throw ParseError(line_no, "duplicate [control] section");
            in_control = true;
        } else if (in_control) {
            b.block(parse_block(tok, line_no));
        } else {
            parse_element(b, tok, line_no);
        }
        if (end == text.size()) break;
    }
    b.current_line_ = 0;
    return b.build();
}

// ---------------------------------------------------------------------------
// Serializer

std::string serialize_netlist(const Circuit& c) {
    std::ostringstream os;
    auto num = [](double v) { return format_number(v); };
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
        const auto& e = c.elements[i];
        if (e.generated_by) continue;
        NodeId far = e.nodes[1];
        if (e.kind == ElementKind::capacitor && e.series_r1 > 0.0) far = c.elements[i + 1].nodes[1];
        os << e.name << ' ' << to_string(e.kind) << ' ' << c.node_names[e.nodes[0].index] << ' '
           << c.node_names[far.index];
        switch (e.kind) {
            case ElementKind::resistor: os << " r=" << num(e.value); break;
            case ElementKind::capacitor:
                os << " c=" << num(e.value);
                if (e.series_r1 > 0.0) os << " r1=" << num(e.series_r1);
                if (e.initial) os << " ic=" << num(*e.initial);
                break;
            case ElementKind::inductor:
                os << " l=" << num(e.value);
                if (e.parallel_rp > 0.0) os << " rp=" << num(e.parallel_rp);
                if (e.initial) os << " ic=" << num(*e.initial);
                break;
            case ElementKind::dc_source: os << " v=" << num(e.value); break;
            case ElementKind::sine_source:
                os << " vm=" << num(e.value) << " f=" << num(e.frequency);
                if (e.phase != 0.0) os << " phase=" << num(e.phase);
                break;
            case ElementKind::diode:
                if (e.von != 0.0) os << " von=" << num(e.von);
                break;
            case ElementKind::controlled_switch: os << " gate=" << e.signal; break;
            case ElementKind::ammeter:
            case ElementKind::voltmeter: os << " out=" << e.signal; break;
        }
        os << '\n';
    }
    if (!c.control.empty()) {
        os << "[control]\n";
        for (const auto& blk : c.control) {
            os << blk.name << ' ' << to_string(blk.kind);
            for (const auto& in : blk.inputs) os << ' ' << in;
            for (const auto& [k, v] : blk.params) os << ' ' << k << '=' << num(v);
            if (blk.kind == BlockKind::sum) os << " signs=" << blk.signs;
            if (!blk.complement.empty()) os << " comp=" << blk.complement;
            os << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Validation

namespace {

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

bool defines_voltage(const Element& e) {
    switch (e.kind) {
        case ElementKind::dc_source:
        case ElementKind::sine_source:
        case ElementKind::ammeter:
        case ElementKind::diode:
        case ElementKind::controlled_switch: return true;
        case ElementKind::capacitor: return e.series_r1 == 0.0;
        default: return false;
    }
}

bool conducts_when_switches_open(const Element& e) {
    return !e.is_switching() && e.kind != ElementKind::voltmeter;
}

}  // namespace

std::vector<std::string> validate_circuit(const Circuit& c) {
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
        const auto& e = c.elements[i];
        if (e.kind == ElementKind::capacitor && e.series_r1 == 0.0) {
            // Loop through voltage-defining elements: A is singular once the
            // switches in the loop conduct.
            DisjointSet ds(c.node_count());
            std::vector<std::string> via;
            for (std::size_t j = 0; j < c.elements.size(); ++j) {
                if (j == i || !defines_voltage(c.elements[j])) continue;
                ds.unite(c.elements[j].nodes[0].index, c.elements[j].nodes[1].index);
            }
            if (ds.find(e.nodes[0].index) == ds.find(e.nodes[1].index)) {
                warnings.push_back("capacitor '" + e.name +
                                   "' closes a loop of voltage sources, switches or capacitors without series "
                                   "resistance; add r1= to avoid a singular matrix");
            }
        }
        if (e.kind == ElementKind::inductor && e.parallel_rp == 0.0) {
            DisjointSet ds(c.node_count());
            for (std::size_t j = 0; j < c.elements.size(); ++j) {
                if (j == i || !conducts_when_switches_open(c.elements[j])) continue;
                ds.unite(c.elements[j].nodes[0].index, c.elements[j].nodes[1].index);
            }
            if (ds.find(e.nodes[0].index) != ds.find(e.nodes[1].index)) {
                warnings.push_back("inductor '" + e.name +
                                   "' can be isolated when its switches are off; add rp= to avoid a singular "
                                   "matrix");
            }
        }
    }
    return warnings;
}

}  // namespace elex
