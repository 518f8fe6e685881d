#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridcast/solver.hpp"
#include "test_support.hpp"

using namespace gridcast;
using namespace gridcast::testing;

namespace {

Feeder two_bus() { return load_feeder_file(data_path("feeder_2bus.txt")); }

// symmetric three-phase, identical per-phase loads, circulant series block
Feeder symmetric_three_phase() {
    std::string doc = R"(
[buses]
s abc slack 2.4
m abc load 2.4
e abc load 2.4
[branches]
s m 60-60j -5+2j -5+2j -5+2j 60-60j -5+2j -5+2j -5+2j 60-60j
m e 80-40j -3+1j -3+1j -3+1j 80-40j -3+1j -3+1j -3+1j 80-40j
[loads]
m a 50 20 s0
m b 50 20 s0
m c 50 20 s0
e a 30 10 s0
e b 30 10 s0
e c 30 10 s0
[source]
bus s
base_kva 1000
)";
    return parse_feeder(doc);
}

}  // namespace

TEST_CASE("two-bus case matches the closed-form voltage") {
    Feeder f = two_bus();
    PowerFlowSolution sol = solve_fixed_point(f, {1.0});
    REQUIRE(sol.converged);
    double expected = two_bus_voltage(Complex(0.01, 0.01), Complex(0.1, 0.05));
    CHECK(sol.vmag(1) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(sol.vmag(1) == doctest::Approx(0.99850).epsilon(1e-4));
    CHECK(sol.final_mismatch <= 1e-8);
}

TEST_CASE("zero multipliers give the flat slack profile in one pass") {
    Feeder f = symmetric_three_phase();
    PowerFlowSolution sol = solve_fixed_point(f, std::vector<double>(6, 0.0));
    REQUIRE(sol.converged);
    CHECK(sol.iterations <= 1);
    NodeIndex idx = NodeIndex::build(f);
    for (int r = 0; r < idx.size(); ++r) CHECK(sol.vmag(r) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("phase symmetry carries through the solution") {
    Feeder f = symmetric_three_phase();
    PowerFlowSolution sol = solve_fixed_point(f, std::vector<double>(6, 1.0));
    REQUIRE(sol.converged);
    NodeIndex idx = NodeIndex::build(f);
    for (int bus = 0; bus < 3; ++bus) {
        double ma = sol.vmag(idx.row(bus, Phase::A));
        double mb = sol.vmag(idx.row(bus, Phase::B));
        double mc = sol.vmag(idx.row(bus, Phase::C));
        CHECK(ma == doctest::Approx(mb).epsilon(1e-10));
        CHECK(ma == doctest::Approx(mc).epsilon(1e-10));
    }
}

TEST_CASE("power_mismatch at a converged solution is within tolerance") {
    Feeder f = two_bus();
    SolverOptions opts;
    PowerFlowSolution sol = solve_fixed_point(f, {1.0}, opts);
    REQUIRE(sol.converged);
    CHECK(power_mismatch(f, {1.0}, sol.voltage) <= opts.tolerance);
}

TEST_CASE("power_mismatch at flat start equals the specified load") {
    Feeder f = two_bus();
    FixedPointSolver solver(f);
    double mism = power_mismatch(f, {1.0}, solver.flat_start());
    CHECK(mism == doctest::Approx(std::abs(Complex(0.1, 0.05))).epsilon(1e-12));
}

TEST_CASE("power_mismatch is zero for a zero-load feeder at flat start") {
    Feeder f = two_bus();
    FixedPointSolver solver(f);
    CHECK(power_mismatch(f, {0.0}, solver.flat_start()) == 0.0);
}

TEST_CASE("power_mismatch rejects wrong dimensions") {
    Feeder f = two_bus();
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(5);
    CHECK_THROWS_AS(power_mismatch(f, {1.0}, v), Error);
}

TEST_CASE("head power equals load plus series loss on the two-bus case") {
    Feeder f = two_bus();
    PowerFlowSolution sol = solve_fixed_point(f, {1.0});
    REQUIRE(sol.converged);
    auto s = branch_injected_power(sol, f, 0, 1);

    // independent: S_head = S_load + |I|^2 z with I the converged current
    Complex v2 = sol.voltage(1);
    Complex i = std::conj(Complex(0.1, 0.05) / v2);
    Complex loss = std::norm(i) * Complex(0.01, 0.01);
    Complex expected = Complex(0.1, 0.05) + loss;
    CHECK(s[0] == doctest::Approx(expected.real()).epsilon(1e-9));
    CHECK(s[3] == doctest::Approx(expected.imag()).epsilon(1e-9));
    CHECK(s[0] == doctest::Approx(0.10013).epsilon(1e-3));
    CHECK(s[3] == doctest::Approx(0.05013).epsilon(1e-3));
    CHECK(s[1] == 0.0);  // absent phases stay zero
    CHECK(s[2] == 0.0);
}

TEST_CASE("head power is zero on a zero-load feeder") {
    Feeder f = two_bus();
    PowerFlowSolution sol = solve_fixed_point(f, {0.0});
    auto s = branch_injected_power(sol, f, 0, 1);
    for (double v : s) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("balanced feeder has equal per-phase head powers") {
    Feeder f = symmetric_three_phase();
    PowerFlowSolution sol = solve_fixed_point(f, std::vector<double>(6, 1.0));
    auto s = branch_injected_power(sol, f, 1, 2);
    CHECK(s[0] == doctest::Approx(s[1]).epsilon(1e-9));
    CHECK(s[0] == doctest::Approx(s[2]).epsilon(1e-9));
    CHECK(s[3] == doctest::Approx(s[4]).epsilon(1e-9));
    CHECK(s[3] == doctest::Approx(s[5]).epsilon(1e-9));
}

TEST_CASE("branch_injected_power validates its arguments") {
    Feeder f = two_bus();
    PowerFlowSolution sol = solve_fixed_point(f, {1.0});
    CHECK_THROWS_AS(branch_injected_power(sol, f, 5, 1), Error);
    CHECK_THROWS_AS(branch_injected_power(sol, f, 0, 7), Error);
}

TEST_CASE("convergence certificate holds on random feeders") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        Feeder f = make_random_radial_feeder(12, seed);
        std::vector<double> mult(f.loads.size(), 1.0);
        SolverOptions opts;
        PowerFlowSolution sol = solve_fixed_point(f, mult, opts);
        REQUIRE(sol.converged);
        // re-checked independently of the solver loop
        CHECK(power_mismatch(f, mult, sol.voltage) <= opts.tolerance);
    }
}

TEST_CASE("slack power balances load plus losses") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Feeder f = make_random_radial_feeder(10, seed);
        for (auto& br : f.branches) br.shunt.setZero();
        std::vector<double> mult(f.loads.size(), 1.0);
        SolverOptions opts;
        PowerFlowSolution sol = solve_fixed_point(f, mult, opts);
        REQUIRE(sol.converged);

        NodeIndex idx = NodeIndex::build(f);
        Eigen::MatrixXcd y = dense_admittance(f, idx);
        Eigen::VectorXcd current = y * sol.voltage;

        Complex slack_power(0, 0);
        for (int r = 0; r < idx.size(); ++r)
            if (idx.entries[static_cast<std::size_t>(r)].first == f.slack_bus)
                slack_power += sol.voltage(r) * std::conj(current(r));

        Complex total_load(0, 0);
        for (std::size_t l = 0; l < f.loads.size(); ++l)
            total_load += mult[l] * Complex(f.loads[l].base_p_kw, f.loads[l].base_q_kvar) / f.base_kva;

        Complex losses(0, 0);
        for (const auto& br : f.branches)
            for (Phase p : kAllPhases)
                for (Phase q : kAllPhases) {
                    Complex ys = br.series(static_cast<int>(p), static_cast<int>(q));
                    if (ys == Complex(0, 0)) continue;
                    int rp_f = idx.row(br.from, p), rq_f = idx.row(br.from, q);
                    int rp_t = idx.row(br.to, p), rq_t = idx.row(br.to, q);
                    Complex vp = (rp_f >= 0 ? sol.voltage(rp_f) : 0.0) -
                                 (rp_t >= 0 ? sol.voltage(rp_t) : 0.0);
                    Complex vq = (rq_f >= 0 ? sol.voltage(rq_f) : 0.0) -
                                 (rq_t >= 0 ? sol.voltage(rq_t) : 0.0);
                    losses += vp * std::conj(ys * vq);
                }

        CHECK(std::abs(slack_power - (total_load + losses)) <= 10.0 * opts.tolerance);
    }
}

TEST_CASE("increasing load strictly decreases the two-bus voltage") {
    Feeder f = two_bus();
    FixedPointSolver solver(f);
    double previous = 2.0;
    for (double m : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
        PowerFlowSolution sol = solver.solve({m});
        REQUIRE(sol.converged);
        CHECK(sol.vmag(1) < previous);
        previous = sol.vmag(1);
    }
}

TEST_CASE("fixed point agrees with the Newton oracle on small feeders") {
    for (int n = 2; n <= 6; ++n) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Feeder f = make_random_single_phase_feeder(n, seed * 100 + static_cast<std::uint64_t>(n));
            std::vector<double> mult(f.loads.size(), 1.0);
            SolverOptions opts;
            opts.tolerance = 1e-12;
            PowerFlowSolution sol = solve_fixed_point(f, mult, opts);
            REQUIRE(sol.converged);
            Eigen::VectorXcd reference = newton_power_flow(f, mult);
            for (int r = 0; r < sol.voltage.size(); ++r)
                CHECK(std::abs(sol.voltage(r) - reference(r)) < 1e-8);
        }
    }
}

TEST_CASE("non-convergence is flagged, not thrown") {
    Feeder f = two_bus();
    SolverOptions opts;
    opts.max_iterations = 1;
    opts.tolerance = 1e-14;
    PowerFlowSolution sol = solve_fixed_point(f, {1.0}, opts);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations == 1);
    CHECK(sol.final_mismatch > opts.tolerance);
}

TEST_CASE("deep overload either trips the voltage guard or fails to converge") {
    Feeder f = two_bus();
    // far past the maximum deliverable power for z = 0.01+0.01j
    try {
        PowerFlowSolution sol = solve_fixed_point(f, {600.0});
        CHECK_FALSE(sol.converged);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("voltage") != std::string::npos);
    }
}
