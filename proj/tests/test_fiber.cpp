#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "entsim/fiber.hpp"
#include "entsim/polarization.hpp"
#include "entsim/rng.hpp"

using namespace entsim;

namespace {

NetworkPath sample_path() {
    NetworkPath p;
    p.name = "sample";
    PathComponent sw;
    sw.kind = ComponentKind::optical_switch;
    sw.insertion_loss_db = 1.0;
    sw.pdl_db = 0.5;
    FiberSegment f;
    f.length_km = 10.0;
    f.attenuation_db_per_km = 0.31;
    f.lumped.push_back({4.0, 1.3});
    PathComponent panel;
    panel.kind = ComponentKind::patch_panel;
    panel.insertion_loss_db = 0.3;
    panel.pdl_db = 0.1;
    p.elements = {sw, f, panel};
    return p;
}

} // namespace

TEST_CASE("path loss adds fiber, lumped, and insertion losses", "[fiber]") {
    const NetworkPath p = sample_path();
    REQUIRE(path_loss_db(p) == Catch::Approx(1.0 + 3.1 + 1.3 + 0.3).margin(1e-12));
    REQUIRE(p.total_fiber_km() == Catch::Approx(10.0).margin(1e-12));
    REQUIRE(p.total_pdl_db() == Catch::Approx(0.6).margin(1e-12));
}

TEST_CASE("effective transform folds loss, PDL, and the compensator", "[fiber]") {
    NetworkPath p = sample_path();
    RandomStream rng(3);
    p.birefringence_state.unitary = random_su2(rng);
    ChannelTransform t = effective_transform(p);
    REQUIRE(t.scalar_transmission == Catch::Approx(std::pow(10.0, -5.7 / 10.0)).margin(1e-12));
    REQUIRE(t.pdl_db == Catch::Approx(0.6).margin(1e-12));
    // a correction equal to the inverse rotation neutralizes the channel
    p.apc_correction = p.birefringence_state.unitary.adjoint();
    t = effective_transform(p);
    REQUIRE(su2_rotation_angle(t.unitary) == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("birefringence drift accumulates the configured variance", "[fiber]") {
    // 100 steps of 1 s at diffusion 1e-4 rad^2/s: mean squared rotation angle
    // approaches 0.01 (small-angle composition adds variances).
    RandomStream rng(17);
    double sum_sq = 0.0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        NetworkPath p;
        p.name = "drift";
        FiberSegment f;
        f.length_km = 1.0;
        f.drift_diffusion = 1e-4;
        p.elements = {f};
        for (int i = 0; i < 100; ++i) evolve_birefringence(p, 1.0, rng);
        const double angle = su2_rotation_angle(p.birefringence_state.unitary);
        sum_sq += angle * angle;
    }
    REQUIRE(sum_sq / trials > 0.0085);
    REQUIRE(sum_sq / trials < 0.0115);
}

TEST_CASE("drift-free paths stay exactly put", "[fiber]") {
    NetworkPath p;
    p.name = "static";
    FiberSegment f;
    f.length_km = 5.0;
    p.elements = {f};
    RandomStream rng(9);
    const Matrix2c before = p.birefringence_state.unitary;
    for (int i = 0; i < 10; ++i) evolve_birefringence(p, 1.0, rng);
    REQUIRE((p.birefringence_state.unitary - before).norm() < 1e-14);
    REQUIRE_THROWS_AS(evolve_birefringence(p, -1.0, rng), std::invalid_argument);
}

TEST_CASE("jump processes fire at the configured rate", "[fiber]") {
    NetworkPath p;
    p.name = "jumpy";
    FiberSegment f;
    f.length_km = 1.0;
    f.jump_rate = 1e9;  // fires every step
    f.jump_magnitude = 0.5;
    p.elements = {f};
    RandomStream rng(21);
    const Matrix2c before = p.birefringence_state.unitary;
    evolve_birefringence(p, 1.0, rng);
    REQUIRE((p.birefringence_state.unitary - before).norm() > 1e-6);
    REQUIRE_NOTHROW(p.birefringence_state.validate(1e-10));
}

TEST_CASE("scramble perturbs the channel; zero magnitude is a no-op", "[fiber]") {
    NetworkPath p = sample_path();
    RandomStream rng(33);
    const Matrix2c before = p.birefringence_state.unitary;
    scramble_birefringence(p, 0.0, rng);
    REQUIRE((p.birefringence_state.unitary - before).norm() < 1e-14);
    scramble_birefringence(p, 1.5, rng);
    REQUIRE_NOTHROW(p.birefringence_state.validate(1e-10));
}

TEST_CASE("Raman noise rate matches the closed-form effective length", "[fiber]") {
    NetworkPath p;
    p.name = "coexist";
    FiberSegment f;
    f.length_km = 61.0;
    p.elements = {f};
    p.classical.enabled = true;
    p.classical.launch_power_dbm = 4.0;
    p.classical.attenuation_db_per_km = 0.2;
    p.classical.raman_coeff = 3.54e3;
    p.classical.raman_asymmetry = 0.1;
    p.classical.direction = PropagationDirection::co;
    REQUIRE(raman_noise_rate(p) == Catch::Approx(18145.4255719).margin(1e-3));
    p.classical.direction = PropagationDirection::counter;
    REQUIRE(raman_noise_rate(p) == Catch::Approx(9619.3977921).margin(1e-3));
    p.classical.enabled = false;
    REQUIRE(raman_noise_rate(p) == 0.0);
}

TEST_CASE("Raman noise is monotone nondecreasing in power and length", "[fiber]") {
    NetworkPath p;
    p.name = "mono";
    FiberSegment f;
    f.length_km = 1.0;
    p.elements = {f};
    p.classical.enabled = true;
    for (const auto dir : {PropagationDirection::co, PropagationDirection::counter}) {
        p.classical.direction = dir;
        double prev = 0.0;
        for (double km = 1.0; km <= 120.0; km += 1.0) {
            std::get<FiberSegment>(p.elements[0]).length_km = km;
            const double r = raman_noise_rate(p);
            REQUIRE(r >= prev - 1e-12);
            prev = r;
        }
        std::get<FiberSegment>(p.elements[0]).length_km = 50.0;
        prev = 0.0;
        for (double dbm = -10.0; dbm <= 10.0; dbm += 0.5) {
            p.classical.launch_power_dbm = dbm;
            const double r = raman_noise_rate(p);
            REQUIRE(r > prev);
            prev = r;
        }
        p.classical.launch_power_dbm = 4.0;
    }
    // counter-propagating light scatters less into the backward band
    p.classical.direction = PropagationDirection::co;
    const double co = raman_noise_rate(p);
    p.classical.direction = PropagationDirection::counter;
    REQUIRE(raman_noise_rate(p) < co);
}

TEST_CASE("link budget rows sum to the path loss", "[fiber]") {
    const NetworkPath p = sample_path();
    const auto rows = link_budget_report(p);
    REQUIRE(rows.size() == 4);  // switch, fiber, lumped, patch panel
    REQUIRE(rows.back().cumulative_db == Catch::Approx(path_loss_db(p)).margin(1e-12));
    double sum = 0.0;
    for (const auto& r : rows) sum += r.loss_db;
    REQUIRE(sum == Catch::Approx(path_loss_db(p)).margin(1e-12));
    // cumulative column is nondecreasing
    for (std::size_t i = 1; i < rows.size(); ++i)
        REQUIRE(rows[i].cumulative_db >= rows[i - 1].cumulative_db);
}

TEST_CASE("fiber validation rejects inconsistent segments", "[fiber]") {
    FiberSegment f;
    f.length_km = -1.0;
    REQUIRE_THROWS_AS(f.validate(), std::invalid_argument);
    FiberSegment g;
    g.length_km = 10.0;
    g.lumped.push_back({11.0, 1.0});  // beyond the segment
    REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
    NetworkPath p;
    p.name = "";
    REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
}
