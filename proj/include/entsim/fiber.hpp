#pragma once

// Deployed fiber plant: segments, lumped components, birefringence drift,
// and classical-channel Raman noise.
//
// A path's polarization behavior is aggregated into one SU(2) element that
// performs a random-axis diffusion (variance drift_diffusion * dt summed
// over segments) plus occasional jumps. Loss is additive in dB.

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "entsim/polarization.hpp"
#include "entsim/rng.hpp"

namespace entsim {

struct LumpedLoss {
    double position_km = 0.0;
    double loss_db = 0.0;
};

struct FiberSegment {
    std::string label = "fiber";
    double length_km = 0.0;
    double attenuation_db_per_km = 0.31;  // O-band deployed fiber
    double drift_diffusion = 0.0;         // rad^2/s of rotation-angle variance
    double jump_rate = 0.0;               // 1/s
    double jump_magnitude = 0.0;          // rad, half-normal scale
    std::vector<LumpedLoss> lumped;

    double loss_db() const {
        double total = length_km * attenuation_db_per_km;
        for (const auto& l : lumped) total += l.loss_db;
        return total;
    }

    void validate() const {
        if (!(length_km >= 0.0)) throw std::invalid_argument("negative fiber length");
        if (!(attenuation_db_per_km >= 0.0)) throw std::invalid_argument("negative attenuation");
        if (!(drift_diffusion >= 0.0)) throw std::invalid_argument("negative drift diffusion");
        if (!(jump_rate >= 0.0)) throw std::invalid_argument("negative jump rate");
        for (const auto& l : lumped)
            if (!(l.position_km >= 0.0 && l.position_km <= length_km && l.loss_db >= 0.0))
                throw std::invalid_argument("lumped loss outside fiber span");
    }
};

enum class ComponentKind { optical_switch, oadm, patch_panel, apc_injector, apc_compensator };

inline const char* to_string(ComponentKind k) {
    switch (k) {
        case ComponentKind::optical_switch: return "switch";
        case ComponentKind::oadm: return "oadm";
        case ComponentKind::patch_panel: return "patch_panel";
        case ComponentKind::apc_injector: return "apc_injector";
        case ComponentKind::apc_compensator: return "apc_compensator";
    }
    return "?";
}

struct PathComponent {
    ComponentKind kind = ComponentKind::patch_panel;
    double insertion_loss_db = 0.0;
    double pdl_db = 0.0;

    void validate() const {
        if (!(insertion_loss_db >= 0.0)) throw std::invalid_argument("negative insertion loss");
        if (!(pdl_db >= 0.0)) throw std::invalid_argument("negative PDL");
    }
};

enum class PropagationDirection { co, counter };

struct ClassicalChannel {
    bool enabled = false;
    double wavelength_nm = 1560.61;       // DWDM channel 21
    double launch_power_dbm = 4.0;
    PropagationDirection direction = PropagationDirection::co;
    double attenuation_db_per_km = 0.2;   // C-band
    double raman_coeff = 3.54e3;          // photons/(s mW km) before asymmetry
    double raman_asymmetry = 0.1;         // anti-Stokes suppression (quantum band
                                          // is blue of the classical channel)
};

using PathElement = std::variant<FiberSegment, PathComponent>;

// One switchable route through the plant. The aggregate birefringence and the
// APC's correction are both part of the mutable path state.
struct NetworkPath {
    std::string name;
    std::vector<PathElement> elements;
    ClassicalChannel classical;
    ChannelTransform birefringence_state;           // aggregate rotation, drifts
    Matrix2c apc_correction = Matrix2c::Identity(); // owned by the compensator

    void validate() const {
        if (name.empty()) throw std::invalid_argument("path has no name");
        for (const auto& e : elements)
            std::visit([](const auto& x) { x.validate(); }, e);
        birefringence_state.validate(1e-8);
    }

    double total_fiber_km() const {
        double km = 0.0;
        for (const auto& e : elements)
            if (const auto* f = std::get_if<FiberSegment>(&e)) km += f->length_km;
        return km;
    }

    double total_pdl_db() const {
        double pdl = 0.0;
        for (const auto& e : elements)
            if (const auto* c = std::get_if<PathComponent>(&e)) pdl += c->pdl_db;
        return pdl;
    }
};

// Total path loss: fiber attenuation + lumped losses + insertion losses.
inline double path_loss_db(const NetworkPath& p) {
    double total = 0.0;
    for (const auto& e : p.elements) {
        if (const auto* f = std::get_if<FiberSegment>(&e))
            total += f->loss_db();
        else
            total += std::get<PathComponent>(e).insertion_loss_db;
    }
    return total;
}

// Effective one-arm transform of the path right now: correction applied after
// the drifted rotation, component PDL summed in dB, scalar loss from the
// budget. PDL axis defaults to H/V unless the scenario overrides it.
inline ChannelTransform effective_transform(const NetworkPath& p) {
    ChannelTransform t;
    t.unitary = project_su2(p.apc_correction * p.birefringence_state.unitary);
    t.scalar_transmission = std::pow(10.0, -path_loss_db(p) / 10.0);
    t.pdl_db = p.total_pdl_db() + p.birefringence_state.pdl_db;
    t.pdl_axis = p.birefringence_state.pdl_axis;
    return t;
}

// Advances the aggregate birefringence by dt: one Gaussian random-axis
// rotation whose angle variance is the sum of segment diffusions times dt,
// plus, per segment, a half-normal jump with probability 1 - exp(-rate dt).
inline void evolve_birefringence(NetworkPath& p, double dt, RandomStream& rng) {
    if (!(dt >= 0.0)) throw std::invalid_argument("negative dt");
    double variance = 0.0;
    for (const auto& e : p.elements)
        if (const auto* f = std::get_if<FiberSegment>(&e)) variance += f->drift_diffusion * dt;
    Matrix2c u = p.birefringence_state.unitary;
    if (variance > 0.0) {
        const double angle = rng.gaussian(0.0, std::sqrt(variance));
        u = su2_rotation(rng.unit_sphere(), angle) * u;
    }
    for (const auto& e : p.elements) {
        const auto* f = std::get_if<FiberSegment>(&e);
        if (!f || f->jump_rate <= 0.0) continue;
        if (rng.uniform() < 1.0 - std::exp(-f->jump_rate * dt)) {
            const double angle = f->jump_magnitude * std::fabs(rng.gaussian());
            u = su2_rotation(rng.unit_sphere(), angle) * u;
        }
    }
    p.birefringence_state.unitary = project_su2(u);
}

// Applies an abrupt rotation of half-normal scale `magnitude` (switch events,
// manual reconnects).
inline void scramble_birefringence(NetworkPath& p, double magnitude, RandomStream& rng) {
    if (magnitude <= 0.0) return;
    const double angle = magnitude * std::fabs(rng.gaussian());
    p.birefringence_state.unitary =
        project_su2(su2_rotation(rng.unit_sphere(), angle) * p.birefringence_state.unitary);
}

// Spontaneous-Raman noise photons/s scattered from the classical channel into
// the quantum detection band, evaluated at the fiber output. Linear in launch
// power; effective lengths are the standard saturating forms, so the rate is
// monotone nondecreasing in both power and length. Band filtering and
// reabsorption differences are folded into raman_coeff; anti-Stokes collection
// is suppressed by raman_asymmetry.
inline double raman_noise_rate(const NetworkPath& p) {
    const auto& c = p.classical;
    if (!c.enabled) return 0.0;
    const double length_km = p.total_fiber_km();
    if (length_km <= 0.0) return 0.0;
    const double alpha = c.attenuation_db_per_km * std::log(10.0) / 10.0;  // Np/km
    double l_eff;
    if (alpha <= 0.0) {
        l_eff = (c.direction == PropagationDirection::co) ? length_km : length_km;
    } else if (c.direction == PropagationDirection::co) {
        l_eff = (1.0 - std::exp(-alpha * length_km)) / alpha;
    } else {
        l_eff = (1.0 - std::exp(-2.0 * alpha * length_km)) / (2.0 * alpha);
    }
    const double power_mw = std::pow(10.0, c.launch_power_dbm / 10.0);
    return c.raman_coeff * c.raman_asymmetry * power_mw * l_eff;
}

struct BudgetRow {
    std::string label;
    double position_km = 0.0;   // cumulative fiber distance at this element
    double loss_db = 0.0;
    double cumulative_db = 0.0;
};

// Per-element loss table with exact cumulative sums. Each fiber contributes
// one attenuation row plus one row per lumped loss.
inline std::vector<BudgetRow> link_budget_report(const NetworkPath& p) {
    std::vector<BudgetRow> rows;
    double km = 0.0, db = 0.0;
    for (const auto& e : p.elements) {
        if (const auto* f = std::get_if<FiberSegment>(&e)) {
            const double fiber_db = f->length_km * f->attenuation_db_per_km;
            db += fiber_db;
            rows.push_back({f->label + " (" + std::to_string(f->length_km).substr(0, 5) + " km)",
                            km + f->length_km, fiber_db, db});
            for (const auto& l : f->lumped) {
                db += l.loss_db;
                rows.push_back({"lumped", km + l.position_km, l.loss_db, db});
            }
            km += f->length_km;
        } else {
            const auto& c = std::get<PathComponent>(e);
            db += c.insertion_loss_db;
            rows.push_back({to_string(c.kind), km, c.insertion_loss_db, db});
        }
    }
    return rows;
}

} // namespace entsim
