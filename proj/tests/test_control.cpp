#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "elexsim/circuits.hpp"
#include "elexsim/control.hpp"
#include "elexsim/error.hpp"
#include "elexsim/netlist.hpp"

using namespace elex;

namespace {

double sig(const ControlGraph& g, const ControlEvaluation& ev, const char* name) {
    auto i = g.signal_index(name);
    REQUIRE(i.has_value());
    return ev.signals[*i];
}

// Frequency response of the parallel realization actually used by the
// evaluator: feedthrough plus a first-order lag ds/dt = wp (u - s).
std::complex<double> decomposed_response(const FilterDecomposition& d, double w) {
    const std::complex<double> s(0.0, w);
    return d.feedthrough + d.state_path_gain * (d.pole / (s + d.pole));
}

std::complex<double> reference_response(double kc, double wz, double wp, double w) {
    const std::complex<double> s(0.0, w);
    return kc * (1.0 + s / wz) / (1.0 + s / wp);
}

const char* kVscConst =
    "vdc vdc p 0 v=400\n"
    "s1 sw p a gate=g1\n"
    "s2 sw a 0 gate=g2\n"
    "l1 l a m1 l=10m\n"
    "am1 am m1 m2 out=ifb\n"
    "rg r m2 0 r=10\n"
    "vm1 vm m2 0 out=vfb\n"
    "[control]\n"
    "iref const v=2\n"
    "xtri tri f=20k min=-1 max=1\n"
    "x1 sum iref ifb signs=+-\n"
    "x2 gain x1 k=7\n"
    "x3 sum x2 vfb signs=+-\n"
    "x4 gain x3 k=0.0025\n"
    "g1 cmp x4 xtri comp=g2\n";

}  // namespace

TEST_CASE("filter decomposition of the buck compensator") {
    auto d = decompose_filter(4.551e3, 6.492e3, 6.081e5);
    CHECK(d.k == doctest::Approx(1.0 - 6.081e5 / 6.492e3).epsilon(1e-14));
    CHECK(d.k == doctest::Approx(-92.669).epsilon(1e-5));
    CHECK(d.feedthrough == doctest::Approx(4.551e3 * 6.081e5 / 6.492e3));
    CHECK(d.state_path_gain == doctest::Approx(4.551e3 * d.k));
    CHECK(d.pole == 6.081e5);
    // DC gain equals Kc.
    CHECK(d.feedthrough + d.state_path_gain == doctest::Approx(4.551e3).epsilon(1e-12));
    CHECK(std::abs(decomposed_response(d, 1e-9)) == doctest::Approx(4.551e3).epsilon(1e-12));
}

TEST_CASE("pole-zero cancellation leaves a pure gain") {
    auto d = decompose_filter(3.0, 100.0, 100.0);
    CHECK(d.k == 0.0);
    CHECK(d.state_path_gain == 0.0);
    CHECK(d.feedthrough == 3.0);
}

TEST_CASE("nonpositive filter frequencies are rejected") {
    CHECK_THROWS_AS(decompose_filter(1, 0, 1), ParameterError);
    CHECK_THROWS_AS(decompose_filter(1, 1, -1), ParameterError);
    CHECK_THROWS_AS(decompose_filter(1, std::numeric_limits<double>::quiet_NaN(), 1), ParameterError);
}

TEST_CASE("decomposed frequency response matches the lead-lag form") {
    std::mt19937_64 rng(100);
    std::uniform_real_distribution<double> lw(1.0, 7.0);
    std::uniform_real_distribution<double> lk(-2.0, 4.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double kc = std::pow(10.0, lk(rng)) * (trial % 2 ? -1.0 : 1.0);
        const double wz = std::pow(10.0, lw(rng));
        const double wp = std::pow(10.0, lw(rng));
        auto d = decompose_filter(kc, wz, wp);
        for (int i = 0; i < 20; ++i) {
            const double w = std::pow(10.0, -1.0 + 9.0 * i / 19.0);
            auto h = reference_response(kc, wz, wp, w);
            auto hd = decomposed_response(d, w);
            CHECK(std::abs(hd - h) <= 1e-10 * std::abs(h));
        }
    }
}

TEST_CASE("carrier waveforms") {
    CHECK(carrier_value(BlockKind::sawtooth, 0, 1, 4e5, 1.25e-6) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(carrier_value(BlockKind::triangle, -1, 1, 2e4, 0.0) == -1.0);
    CHECK(carrier_value(BlockKind::triangle, -1, 1, 2e4, 25e-6) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(carrier_value(BlockKind::triangle, -1, 1, 2e4, 12.5e-6) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(carrier_value(BlockKind::sawtooth, 2, 4, 10, 0.075) == doctest::Approx(3.5).epsilon(1e-12));

    std::mt19937_64 rng(7);
    for (BlockKind kind : {BlockKind::triangle, BlockKind::sawtooth}) {
        const double f = kind == BlockKind::triangle ? 2e4 : 4e5;
        std::uniform_real_distribution<double> u(0.0, 1e3 / f);
        for (int i = 0; i < 1000; ++i) {
            const double t = u(rng);
            const double a = carrier_value(kind, -1, 1, f, t);
            const double b = carrier_value(kind, -1, 1, f, t + 1.0 / f);
            // The sawtooth jumps at whole periods; compare away from that edge.
            const double frac = f * t - std::floor(f * t);
            if (kind == BlockKind::sawtooth && (frac < 1e-6 || frac > 1 - 1e-6)) continue;
            CHECK(std::abs(a - b) <= 1e-12);
            CHECK(a >= -1.0);
            CHECK(a <= 1.0);
        }
        for (int n = 0; n <= 1000; n += 37) {
            CHECK(carrier_value(kind, -1, 1, f, n / f) == doctest::Approx(carrier_value(kind, -1, 1, f, 0.0)));
        }
    }
}

TEST_CASE("integrator stage update clamps") {
    const std::vector<double> beta{0.25};
    CHECK(integrator_stage_update(0.99, std::vector<double>{1.0}, beta, 0.0, 1.0) == 1.0);
    CHECK(integrator_stage_update(0.01, std::vector<double>{-1.0}, beta, 0.0, 1.0) == 0.0);
    CHECK(integrator_stage_update(0.5, std::vector<double>{0.0}, beta, 0.0, 1.0) == 0.5);
    const std::vector<double> beta2{3.0 / 32.0, 9.0 / 32.0};
    CHECK(integrator_stage_update(0.0, std::vector<double>{0.32, 0.32}, beta2, -1.0, 1.0) ==
          doctest::Approx(0.12));
}

TEST_CASE("converter control graph evaluates in pass order") {
    Circuit c = parse_netlist(kVscConst);
    ControlGraph g = ControlGraph::build(c);
    CHECK(g.signal_names() ==
          std::vector<std::string>{"ifb", "vfb", "iref", "xtri", "x1", "x2", "x3", "x4", "g1", "g2"});
    CHECK(g.pass_count() == 5);
    CHECK(g.state_count() == 0);

    const std::vector<double> fb{1.5, 3.0};
    auto ev = g.evaluate(0.0, {}, fb);
    CHECK(ev.passes == 5);
    CHECK(sig(g, ev, "x1") == doctest::Approx(0.5));
    CHECK(sig(g, ev, "x2") == doctest::Approx(3.5));
    CHECK(sig(g, ev, "x3") == doctest::Approx(0.5));
    CHECK(sig(g, ev, "x4") == doctest::Approx(0.5 / 400.0));
    CHECK(sig(g, ev, "xtri") == -1.0);
    CHECK(sig(g, ev, "g1") == 1.0);
    CHECK(sig(g, ev, "g2") == 0.0);
    auto gates = g.gate_values(c, ev.signals);
    CHECK(gates == std::vector<double>{1.0, 0.0});

    // Near the carrier peak the comparator flips.
    auto ev2 = g.evaluate(25e-6, {}, fb);
    CHECK(sig(g, ev2, "g1") == 0.0);
    CHECK(sig(g, ev2, "g2") == 1.0);

    REQUIRE(g.comparators().size() == 1);
    CHECK(g.comparators()[0].input_a == *g.signal_index("x4"));
    CHECK(g.comparators()[0].input_b == *g.signal_index("xtri"));
    REQUIRE(g.carriers().size() == 1);
    CHECK(g.carrier_for_signal(*g.signal_index("xtri")) != nullptr);
    CHECK(g.carrier_for_signal(*g.signal_index("x1")) == nullptr);
}

TEST_CASE("builtin converter graph matches the hand-computed chain") {
    VscParams p;
    Circuit c = vsc_cc_circuit(p);
    ControlGraph g = ControlGraph::build(c);
    const double t = 3e-3;
    auto ev = g.evaluate(t, {}, std::vector<double>{1.5, 3.0});
    const double iref = sig(g, ev, "iref");
    const double kp = 2.0 * std::numbers::pi * p.f_tri * p.l / 10.0;
    CHECK(sig(g, ev, "x1") == doctest::Approx(iref - 1.5));
    CHECK(sig(g, ev, "x2") == doctest::Approx(kp * (iref - 1.5)));
    CHECK(sig(g, ev, "x3") == doctest::Approx(kp * (iref - 1.5) - 3.0));
    CHECK(sig(g, ev, "x4") == doctest::Approx((kp * (iref - 1.5) - 3.0) / (2.0 * p.v0)));
    for (const char* gate : {"g1", "g2", "g3", "g4"}) {
        const double v = sig(g, ev, gate);
        CHECK((v == 0.0 || v == 1.0));
    }
    CHECK(sig(g, ev, "g1") + sig(g, ev, "g2") == 1.0);
    CHECK(sig(g, ev, "g3") + sig(g, ev, "g4") == 1.0);
}

TEST_CASE("comparator tie gives zero") {
    Circuit c = parse_netlist("v vdc 1 0 v=1\nr r 1 0 r=1\n[control]\na const v=0.5\nb const v=0.5\ng cmp a b\n");
    ControlGraph g = ControlGraph::build(c);
    auto ev = g.evaluate(0.0, {}, {});
    CHECK(sig(g, ev, "g") == 0.0);
}

TEST_CASE("buck graph at zero error") {
    Circuit c = buck_vc_circuit();
    ControlGraph g = ControlGraph::build(c);
    CHECK(g.state_names() == std::vector<std::string>{"x8.s", "x9"});
    std::vector<double> states{0.0, 0.4};
    auto ev = g.evaluate(1e-3, states, std::vector<double>{12.0});
    CHECK(sig(g, ev, "x1") == 0.0);
    CHECK(sig(g, ev, "x8") == 0.0);
    CHECK(sig(g, ev, "x9") == 0.4);
    CHECK(ev.derivatives == std::vector<double>{0.0, 0.0});

    // The filter state relaxes toward its input at rate wp.
    auto ev2 = g.evaluate(1e-3, states, std::vector<double>{11.0});
    CHECK(ev2.derivatives[0] == doctest::Approx(6.081e5 * 1.0));
    auto d = decompose_filter(4.551e3, 6.492e3, 6.081e5);
    CHECK(sig(g, ev2, "x8") == doctest::Approx(d.feedthrough));
    CHECK(ev2.derivatives[1] == doctest::Approx(d.feedthrough));

    // Integrator output is limited even if the state is outside.
    std::vector<double> wide{0.0, 1.7};
    CHECK(sig(g, g.evaluate(0.0, wide, std::vector<double>{12.0}), "x9") == 1.0);
    g.clamp_states(wide);
    CHECK(wide[1] == 1.0);
    auto bounds = g.state_bounds();
    CHECK(bounds[1] == std::pair<double, double>{0.0, 1.0});
    CHECK(std::isinf(bounds[0].second));
}

TEST_CASE("algebraic loop is a graph error") {
    Circuit c = parse_netlist(
        "v vdc 1 0 v=1\nr r 1 0 r=1\n[control]\nx gain y k=1\ny sum x z signs=++\nz const v=1\n");
    try {
        ControlGraph::build(c);
        FAIL("expected GraphError");
    } catch (const GraphError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("x") != std::string::npos);
        CHECK(msg.find("y") != std::string::npos);
    }
}

TEST_CASE("graph construction errors") {
    CHECK_THROWS_AS(ControlGraph::build(parse_netlist("v vdc 1 0 v=1\ns sw 1 0 gate=nope\n[control]\na const v=1\n")),
                    Error);
    CHECK_THROWS_AS(
        ControlGraph::build(parse_netlist("v vdc 1 0 v=1\nr r 1 0 r=1\n[control]\nx integ u min=1 max=0\nu const v=1\n")),
        Error);
    Circuit c = parse_netlist(kVscConst);
    ControlGraph g = ControlGraph::build(c);
    CHECK_THROWS_AS(g.evaluate(0.0, {}, std::vector<double>{1.0}), ParameterError);
}

TEST_CASE("initial states honor ic and bounds") {
    Circuit c = parse_netlist(
        "v vdc 1 0 v=1\nr r 1 0 r=1\n[control]\nu const v=1\na integ u ic=5 max=2\nb integ u ic=-1\n");
    ControlGraph g = ControlGraph::build(c);
    CHECK(g.initial_states() == std::vector<double>{2.0, -1.0});
    auto ev = g.evaluate(0.0, g.initial_states(), {});
    CHECK(ev.derivatives == std::vector<double>{1.0, 1.0});
}

TEST_CASE("step block times") {
    ControlGraph g = ControlGraph::build(series_switches_circuit());
    CHECK(g.step_times() == std::vector<double>{1e-3, 1e-3, 2e-3});
    auto before = g.evaluate(0.5e-3, {}, {});
    auto mid = g.evaluate(1.5e-3, {}, {});
    auto after = g.evaluate(2.5e-3, {}, {});
    CHECK(sig(g, before, "g1") == 1.0);
    CHECK(sig(g, before, "g2") == 0.0);
    CHECK(sig(g, mid, "g1") == 0.0);
    CHECK(sig(g, mid, "g2") == 1.0);
    CHECK(sig(g, after, "g2") == 0.0);
}
