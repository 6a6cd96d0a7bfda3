#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "elexsim/assembly.hpp"
#include "elexsim/circuits.hpp"
#include "elexsim/control.hpp"
#include "elexsim/error.hpp"
#include "elexsim/events.hpp"

using namespace elex;

namespace {

const char* kPwm =
    "v vdc 1 0 v=1\ns sw 1 2 gate=g\nr r 2 0 r=1\n"
    "[control]\nduty const v=0.5\nsaw saw f=400k\ng cmp duty saw\n";

// Boost solution with every switch off and a given inductor state.
std::vector<double> boost_off_solution(const Circuit& c, double il) {
    SwitchConfig off(2, false);
    MatrixCache cache(c);
    return cache.solve(off, build_rhs(c, off, {{il, 0.0}, {12.0}, {}}));
}

}  // namespace

TEST_CASE("event kind names") {
    CHECK(to_string(EventKind::diode_turnoff) == "diode_turnoff");
    CHECK(to_string(EventKind::gate_edge) == "gate_edge");
    CHECK(to_string(EventKind::warning) == "warning");
}

TEST_CASE("bisection on a linear diode current") {
    const double h = 2.0, dt = 1e-12;
    int calls = 0;
    auto trial = [&](double tau) {
        ++calls;
        const double i = 1.0 - tau;
        return TurnoffTrial{i > 0.0, i};
    };
    auto b = bisect_diode_turnoff(h, dt, trial);
    CHECK(b.hi - b.lo <= dt);
    CHECK(b.lo <= 1.0);
    CHECK(b.hi >= 1.0);
    CHECK(std::abs(b.lo - 1.0) <= dt);
    CHECK(b.current_lo >= 0.0);
    CHECK(b.current_lo <= 1e-12);
    CHECK(b.time_iterations <= static_cast<int>(std::ceil(std::log2(h / dt))) + 1);
    CHECK(b.current_iterations == 0);
}

TEST_CASE("bisection keeps narrowing until the on-side current is small") {
    // Steep current: 1e3 A/s falls 1e-9 A across a 1e-12 s bracket.
    auto trial = [](double tau) {
        const double i = 1e3 * (0.5 - tau);
        return TurnoffTrial{i > 0.0, i};
    };
    auto b = bisect_diode_turnoff(1.0, 1e-12, trial, 1e-12);
    CHECK(b.current_lo <= 1e-12);
    CHECK(b.current_iterations > 0);
    CHECK(b.hi - b.lo <= 1e-12);
}

TEST_CASE("bisection preconditions") {
    auto still_on = [](double) { return TurnoffTrial{true, 1.0}; };
    CHECK_THROWS_AS(bisect_diode_turnoff(1.0, 1e-12, still_on), EventError);
    auto already_off = [](double) { return TurnoffTrial{false, 0.0}; };
    CHECK_THROWS_AS(bisect_diode_turnoff(1.0, 1e-12, already_off), EventError);
    CHECK_THROWS_AS(bisect_diode_turnoff(0.0, 1e-12, still_on), ParameterError);
    CHECK_THROWS_AS(bisect_diode_turnoff(1.0, 0.0, still_on), ParameterError);
}

TEST_CASE("bisection stops at adjacent doubles below event_dt resolution") {
    // Around t = 1 the double spacing is 2.2e-16: asking for 1e-20 cannot be met.
    auto trial = [](double tau) { return TurnoffTrial{tau < 1.0, 1.0 - tau}; };
    CHECK_THROWS_AS(bisect_diode_turnoff(2.0, 1e-20, trial, 1e-30), EventError);
}

TEST_CASE("turn-off substitution seeds the isolated inductor from its branch current") {
    Circuit c = boost_circuit(1e6);
    auto x = boost_off_solution(c, 0.3);
    const Element& l = c.elements[c.states[0]];
    CHECK(element_current(c, x, l) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(element_voltage(c, x, l) == doctest::Approx(-0.3e6));
    std::vector<double> states{0.3, 5.0};
    auto mask = apply_turnoff_substitution(c, SwitchConfig(2, false), x, states);
    CHECK(mask == std::vector<bool>{true, false});
    CHECK(std::abs(states[0]) <= 1e-12);
    CHECK(states[1] == 5.0);
}

TEST_CASE("substitution is inactive while a path conducts") {
    Circuit c = boost_circuit(1e6);
    SwitchConfig on(std::vector<bool>{true, false});
    MatrixCache cache(c);
    auto x = cache.solve(on, build_rhs(c, on, {{0.3, 5.0}, {12.0}, {}}));
    std::vector<double> states{0.3, 5.0};
    auto mask = apply_turnoff_substitution(c, on, x, states);
    CHECK(mask == std::vector<bool>{false, false});
    CHECK(states == std::vector<double>{0.3, 5.0});
}

TEST_CASE("inductor loop monitor") {
    Circuit c = boost_circuit(1e6);
    SUBCASE("1 A into 1 Mohm warns") {
        auto x = boost_off_solution(c, 1.0);
        auto w = monitor_inductor_loop(c, x, 0.25, 1e3);
        REQUIRE(w.size() == 1);
        CHECK(w[0].kind == EventKind::warning);
        CHECK(w[0].ref == "l1");
        CHECK(w[0].t_before == 0.25);
        CHECK(std::abs(w[0].value) == doctest::Approx(1e6));
    }
    SUBCASE("threshold met exactly does not warn") {
        auto x = boost_off_solution(c, 1e-3);
        const double v = std::abs(element_voltage(c, x, c.elements[c.states[0]]));
        CHECK(monitor_inductor_loop(c, x, 0.0, v).empty());
        CHECK(monitor_inductor_loop(c, x, 0.0, std::nextafter(v, 0.0)).size() == 1);
    }
    SUBCASE("inductors without Rp are not monitored") {
        Circuit plain = CircuitBuilder()
                            .dc_source("v", "1", "0", 1.0)
                            .inductor("l", "1", "2", 1e-3)
                            .resistor("r", "2", "0", 1.0)
                            .build();
        std::vector<double> x(plain.unknown_count(), 0.0);
        x[*plain.voltage_unknown(*plain.find_node("1"))] = 1e9;
        CHECK(monitor_inductor_loop(plain, x, 0.0).empty());
    }
}

TEST_CASE("crossover planner on a sawtooth with constant duty") {
    Circuit c = parse_netlist(kPwm);
    ControlGraph g = ControlGraph::build(c);
    const double dt = 1e-12, delta = 1e-9;
    const double period = 1.0 / 4e5;

    SUBCASE("crossing at (n + 0.5) / f limits a long step") {
        for (int n = 0; n < 5; ++n) {
            const double t = n * period + 0.1e-6;
            auto sig = g.evaluate(t, {}, {}).signals;
            auto plan = plan_crossover_points(g, t, 4e-6, sig, {}, 0.0, dt);
            REQUIRE(plan.has_value());
            CHECK(plan->crossing);
            CHECK(plan->t_cross == doctest::Approx((n + 0.5) * period).epsilon(1e-12));
            CHECK(plan->t_limit == doctest::Approx((n + 0.5) * period - delta).epsilon(1e-12));
        }
    }
    SUBCASE("a step that does not reach the crossing is not limited") {
        auto sig = g.evaluate(0.1e-6, {}, {}).signals;
        CHECK_FALSE(plan_crossover_points(g, 0.1e-6, 0.5e-6, sig, {}, 0.0, dt).has_value());
    }
    SUBCASE("crossing closer than two deltas moves the point past it") {
        const double t = 0.5 * period - 1.5e-9;
        auto sig = g.evaluate(t, {}, {}).signals;
        auto plan = plan_crossover_points(g, t, 1e-6, sig, {}, 0.0, dt);
        REQUIRE(plan.has_value());
        CHECK(plan->t_limit == doctest::Approx(0.5 * period + delta).epsilon(1e-12));
    }
    SUBCASE("after the crossing the carrier reset is scheduled") {
        const double t = 0.5 * period + 1e-8;
        auto sig = g.evaluate(t, {}, {}).signals;
        auto plan = plan_crossover_points(g, t, 4e-6, sig, {}, 0.0, dt);
        REQUIRE(plan.has_value());
        CHECK_FALSE(plan->crossing);
        CHECK(plan->t_limit == doctest::Approx(period).epsilon(1e-12));
    }
}

TEST_CASE("constant comparator inputs give no crossing limit") {
    Circuit c = parse_netlist(
        "v vdc 1 0 v=1\ns sw 1 2 gate=g\nr r 2 0 r=1\n[control]\na const v=0.7\nb const v=0.2\ng cmp a b\n");
    ControlGraph g = ControlGraph::build(c);
    auto sig = g.evaluate(0.0, {}, {}).signals;
    CHECK_FALSE(plan_crossover_points(g, 0.0, 1.0, sig, sig, 0.0, 1e-12).has_value());
    CHECK_FALSE(next_carrier_vertex(g, 0.0).has_value());
}

TEST_CASE("non-carrier inputs use the finite-difference rate") {
    Circuit c = parse_netlist(
        "v vdc 1 0 v=1\nvm vm 1 0 out=u\ns sw 1 2 gate=g\nr r 2 0 r=1\n[control]\nref const v=0\ng cmp u ref\n");
    ControlGraph g = ControlGraph::build(c);
    const std::vector<double> prev{2.0, 0.0, 1.0};
    const std::vector<double> now{1.0, 0.0, 1.0};
    CHECK(signal_rate(g, 0, 1.0, now, prev, 0.0) == doctest::Approx(-1.0));
    auto plan = plan_crossover_points(g, 1.0, 5.0, now, prev, 0.0, 1e-12);
    REQUIRE(plan.has_value());
    CHECK(plan->t_cross == doctest::Approx(2.0));
    CHECK(plan->t_limit == doctest::Approx(2.0 - 1e-9));
    // Without history the rate is unknown and nothing is predicted.
    CHECK_FALSE(plan_crossover_points(g, 1.0, 5.0, now, {}, 0.0, 1e-12).has_value());
}

TEST_CASE("triangle carrier vertices and rates") {
    Circuit c = parse_netlist(
        "v vdc 1 0 v=1\ns sw 1 2 gate=g\nr r 2 0 r=1\n[control]\nu const v=0\nx tri f=20k min=-1 max=1\ng cmp u x\n");
    ControlGraph g = ControlGraph::build(c);
    const std::size_t xi = *g.signal_index("x");
    CHECK(*next_carrier_vertex(g, 0.0) == doctest::Approx(25e-6));
    CHECK(*next_carrier_vertex(g, 25e-6) == doctest::Approx(50e-6));
    CHECK(*next_carrier_vertex(g, 30e-6) == doctest::Approx(50e-6));
    auto sig = g.evaluate(0.0, {}, {}).signals;
    CHECK(signal_rate(g, xi, 10e-6, sig, {}, 0.0) == doctest::Approx(8e4));
    CHECK(signal_rate(g, xi, 30e-6, sig, {}, 0.0) == doctest::Approx(-8e4));
}
