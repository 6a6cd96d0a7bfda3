#include "elexsim/output.hpp"

#include <algorithm>
#include <cstdio>

#include "elexsim/error.hpp"

namespace elex {

std::string format_value(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

void write_waveforms(std::ostream& os, const Engine& engine, const SimulationResult& result,
                     const std::vector<std::string>& select, int precision) {
    const std::vector<std::string> names = engine.column_names();
    std::vector<std::size_t> cols;
    if (select.empty()) {
        for (std::size_t i = 0; i < names.size(); ++i) cols.push_back(i);
    } else {
        for (const auto& s : select) {
            auto it = std::find(names.begin(), names.end(), s);
            if (it == names.end()) throw ParameterError("unknown output signal '" + s + "'");
            cols.push_back(static_cast<std::size_t>(it - names.begin()));
        }
    }
    os << 't';
    for (std::size_t c : cols) os << ',' << csv_field(names[c]);
    os << '\n';
    for (const auto& p : result.points) {
        const std::vector<double> v = engine.columns(p);
        os << format_value(p.t, precision);
        for (std::size_t c : cols) os << ',' << format_value(v[c], precision);
        os << '\n';
    }
}

void write_events(std::ostream& os, const SimulationResult& result, int precision) {
    os << "record,kind,t_before,t_after,ref,value,message\n";
    for (const auto& e : result.events) {
        os << (e.kind == EventKind::warning ? "warning" : "event") << ',' << to_string(e.kind) << ','
           << format_value(e.t_before, precision) << ',' << format_value(e.t_after, precision) << ','
           << csv_field(e.ref) << ',' << format_value(e.value, precision) << ',' << csv_field(e.message) << '\n';
    }
    const StepStats& s = result.stats;
    auto stat = [&](const char* name, double v) { os << "stat," << name << ",,,," << format_value(v, precision) << ",\n"; };
    stat("accepted", static_cast<double>(s.accepted));
    stat("rejected", static_cast<double>(s.rejected));
    stat("floored", static_cast<double>(s.floored));
    stat("assemblies", static_cast<double>(s.assemblies));
    stat("distinct_configs", static_cast<double>(s.distinct_configs));
    stat("solves", static_cast<double>(s.solves));
    stat("bisections", static_cast<double>(s.bisections));
    stat("relaxed_solves", static_cast<double>(s.relaxed_solves));
    stat("planner_truncations", static_cast<double>(s.planner_truncations));
    stat("h_smallest", s.h_smallest);
    stat("completed", result.completed ? 1.0 : 0.0);
}

}  // namespace elex
