#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "entsim/estimators.hpp"
#include "helpers.hpp"

using namespace entsim;
using test_helpers::exact_counts;

namespace {
constexpr double kTsirelson = 2.0 * 1.41421356237309504880;
}

TEST_CASE("CHSH from exact counts reaches the quantum bound with a + sign", "[estimators]") {
    const auto counts = exact_counts(bell_phi_plus(), chsh_settings(), 1e9);
    const ChshResult r = chsh_s(counts);
    REQUIRE(r.s_value == Catch::Approx(kTsirelson).margin(1e-5));
    REQUIRE(r.s_value > 0.0);
    REQUIRE(r.total_coincidences > 0.0);
    // every correlator contributes +/- 1/sqrt(2)
    for (const double e : r.correlators)
        REQUIRE(std::fabs(std::fabs(e) - 1.0 / std::sqrt(2.0)) < 1e-5);
}

TEST_CASE("CHSH of a Werner state scales linearly with visibility", "[estimators]") {
    const auto counts = exact_counts(werner_state(0.92), chsh_settings(), 1e9);
    REQUIRE(chsh_s(counts).s_value == Catch::Approx(2.6021529548).margin(1e-5));
    const auto half = exact_counts(werner_state(0.5), chsh_settings(), 1e9);
    REQUIRE(chsh_s(half).s_value == Catch::Approx(kTsirelson * 0.5).margin(1e-5));
}

TEST_CASE("CHSH accepts a rotated but self-consistent waveplate grid", "[estimators]") {
    const auto counts =
        exact_counts(bell_phi_plus(), chsh_settings(5.0, 27.5, 16.25, 38.75), 1e9);
    REQUIRE(chsh_s(counts).s_value == Catch::Approx(kTsirelson).margin(1e-5));
}

TEST_CASE("Poisson-propagated sigma has the closed-form value on a flat grid", "[estimators]") {
    // all 16 counts equal: every correlator has plus = minus = 50,
    // var(E) = 4*50*50/100^3 = 0.01, so sigma = sqrt(4 * 0.01) = 0.2
    std::vector<SettingCounts> counts;
    for (const auto& w : chsh_settings()) {
        SettingCounts c;
        c.setting = w;
        c.coincidences = 25;
        counts.push_back(c);
    }
    const ChshResult r = chsh_s(counts);
    REQUIRE(r.s_value == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(r.sigma == Catch::Approx(0.2).margin(1e-12));
    REQUIRE(r.total_coincidences == Catch::Approx(400.0).margin(1e-12));
}

TEST_CASE("CHSH grid inference rejects malformed records", "[estimators]") {
    auto counts = exact_counts(bell_phi_plus(), chsh_settings(), 1e6);
    auto fifteen = counts;
    fifteen.pop_back();
    REQUIRE_THROWS_AS(chsh_s(fifteen), SchemaError);

    auto five_angles = counts;
    five_angles[0].setting.idler_wp_deg = 7.0;  // now 5 distinct idler angles
    REQUIRE_THROWS_AS(chsh_s(five_angles), SchemaError);

    // complement structure broken: upper angles not base + 45
    auto grid = chsh_settings();
    for (auto& w : grid)
        if (std::fabs(w.idler_wp_deg - 45.0) < 1e-9) w.idler_wp_deg = 50.0;
    REQUIRE_THROWS_AS(chsh_s(exact_counts(bell_phi_plus(), grid, 1e6)), SchemaError);

    auto zeros = counts;
    for (auto& c : zeros) c.coincidences = 0;
    REQUIRE_THROWS_AS(chsh_s(zeros), DegenerateDataError);
}

TEST_CASE("bootstrap sigma agrees with the propagated estimate", "[estimators]") {
    RandomStream rng(2024);
    // sampled counts, not exact: Poisson draws around the Werner expectation
    auto counts = exact_counts(werner_state(0.9), chsh_settings(), 2.0e4);
    for (auto& c : counts) c.coincidences = rng.poisson(static_cast<double>(c.coincidences));
    const double analytic = chsh_s(counts).sigma;
    const double boot = chsh_sigma_bootstrap(counts, 1500, rng);
    REQUIRE(std::fabs(analytic - boot) / (0.5 * (analytic + boot)) < 0.15);
    REQUIRE_THROWS_AS(chsh_sigma_bootstrap(counts, 1, rng), std::invalid_argument);
}

TEST_CASE("fidelity bounds of Werner states bracket (1+3V)/4 as [V, (1+V)/2]",
          "[estimators]") {
    for (const double v : {0.7, 0.9, 1.0}) {
        const auto counts = exact_counts(werner_state(v), fidelity_settings(), 1e9);
        const FidelityBounds b = fidelity_bounds(counts);
        const double f_true = (1.0 + 3.0 * v) / 4.0;
        REQUIRE(b.lower == Catch::Approx(v).margin(2e-5));
        REQUIRE(b.upper == Catch::Approx((1.0 + v) / 2.0).margin(2e-5));
        REQUIRE(b.lower <= f_true + 1e-9);
        REQUIRE(b.upper >= f_true - 1e-9);
    }
}

TEST_CASE("fidelity bounds clamp to [0,1] but preserve the raw interval", "[estimators]") {
    // singlet (|HV> - |VH>)/sqrt(2): orthogonal to phi+, raw lower goes negative
    Matrix4c m = Matrix4c::Zero();
    m(1, 1) = m(2, 2) = 0.5;
    m(1, 2) = m(2, 1) = -0.5;
    const TwoQubitState singlet(m);
    const auto counts = exact_counts(singlet, fidelity_settings(), 1e9);
    const FidelityBounds b = fidelity_bounds(counts);
    REQUIRE(b.raw_lower < -0.5);
    REQUIRE(b.lower == 0.0);
    REQUIRE(b.upper >= b.lower);
    REQUIRE(b.upper <= 1.0);
}

TEST_CASE("fidelity bounds reject incomplete or empty basis groups", "[estimators]") {
    auto counts = exact_counts(bell_phi_plus(), fidelity_settings(), 1e6);
    auto missing = counts;
    missing.pop_back();
    REQUIRE_THROWS_AS(fidelity_bounds(missing), SchemaError);
    // zero out all four diagonal-basis combinations (waveplates 22.5 / 67.5)
    auto zero_diag = counts;
    for (auto& c : zero_diag)
        if (std::fabs(c.setting.signal_wp_deg - 22.5) < 0.01 ||
            std::fabs(c.setting.signal_wp_deg - 67.5) < 0.01)
            c.coincidences = 0;
    REQUIRE_THROWS_AS(fidelity_bounds(zero_diag), DegenerateDataError);
}

TEST_CASE("setting generators produce the documented grids", "[estimators]") {
    REQUIRE(fidelity_settings().size() == 8);
    const auto grid = chsh_settings();
    REQUIRE(grid.size() == 16);
    // upper waveplate angles are the lower ones + 45 degrees
    REQUIRE(grid[0].idler_wp_deg == 0.0);
    REQUIRE(grid[15].idler_wp_deg == Catch::Approx(67.5));
    REQUIRE(grid[15].signal_wp_deg == Catch::Approx(78.75));
}
