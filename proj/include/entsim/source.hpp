#pragma once

// Entangled photon-pair source model.
//
// The source emits polarization-entangled pairs at a rate linear in pump
// power. Emitted-state quality is independent of rate; rate-dependent
// degradation enters later through accidental coincidences in detection.

#include <stdexcept>

#include "entsim/polarization.hpp"

namespace entsim {

struct SourceParams {
    double brightness_coeff = 2.31e4;   // pairs/s per uW of pump
    double pump_power_uw = 450.0;       // uW
    double coupling_power_mw = 8.4;     // mW reaching the source assembly (metadata)
    double coherence_time_s = 1.0e-9;   // ~1 GHz photon linewidth
    double heralding_efficiency = 0.5;  // per-arm collection probability
    double intrinsic_visibility = 0.995;
    double signal_wavelength_nm = 1324.0;
    double idler_wavelength_nm = 795.0;

    void validate() const {
        if (!(brightness_coeff > 0.0)) throw std::invalid_argument("brightness_coeff must be > 0");
        if (!(pump_power_uw > 0.0)) throw std::invalid_argument("pump_power_uw must be > 0");
        if (!(coherence_time_s > 0.0)) throw std::invalid_argument("coherence_time_s must be > 0");
        if (!(heralding_efficiency > 0.0 && heralding_efficiency <= 1.0))
            throw std::invalid_argument("heralding_efficiency outside (0, 1]");
        if (!(intrinsic_visibility >= 0.0 && intrinsic_visibility <= 1.0))
            throw std::invalid_argument("intrinsic_visibility outside [0, 1]");
    }
};

// Generated pair rate, linear in pump power.
inline double pair_rate(const SourceParams& p) {
    p.validate();
    return p.brightness_coeff * p.pump_power_uw;
}

// Heralded cross-correlation g2_si = 1 + 1/(rate * coherence_time); >= 1
// always, decreasing in pump power.
inline double cross_correlation_g2si(const SourceParams& p) {
    return 1.0 + 1.0 / (pair_rate(p) * p.coherence_time_s);
}

// State leaving the source: a Werner mixture at the intrinsic visibility,
// independent of pump power.
inline TwoQubitState emitted_state(const SourceParams& p) {
    p.validate();
    return werner_state(p.intrinsic_visibility);
}

} // namespace entsim
