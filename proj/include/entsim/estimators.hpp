#pragma once

// Statistical estimators operating on counted coincidences. These consume
// SettingCounts records and never look at the underlying simulation state,
// so they can also ingest externally recorded data.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "entsim/detection.hpp"
#include "entsim/errors.hpp"

namespace entsim {

struct ChshResult {
    double s_value = 0.0;
    double sigma = 0.0;                 // Poisson-propagated 1-sigma
    std::array<double, 4> correlators{};
    double total_coincidences = 0.0;
};

struct FidelityBounds {
    double lower = 0.0;
    double upper = 1.0;
    double raw_lower = 0.0;  // before clamping to [0, 1]
    double raw_upper = 1.0;
};

namespace detail {

// Groups the 16 CHSH settings into the four correlators. The grid must be a
// full cross of four idler and four signal waveplate angles where the upper
// two angles are the orthogonal complements (waveplate + 45 deg) of the
// lower two, within tolerance.
struct ChshGrid {
    std::array<double, 4> idler;   // a, a', a_perp, a'_perp (waveplate deg)
    std::array<double, 4> signal;  // b, b', b_perp, b'_perp
};

inline ChshGrid infer_grid(const std::vector<SettingCounts>& counts) {
    if (counts.size() != 16) throw SchemaError("CHSH record needs exactly 16 settings");
    const double tol = 0.01;
    auto distinct = [&](auto get) {
        std::vector<double> v;
        for (const auto& c : counts) {
            const double x = get(c);
            bool found = false;
            for (double y : v)
                if (std::fabs(x - y) < tol) found = true;
            if (!found) v.push_back(x);
        }
        std::sort(v.begin(), v.end());
        return v;
    };
    const auto iv = distinct([](const SettingCounts& c) { return c.setting.idler_wp_deg; });
    const auto sv = distinct([](const SettingCounts& c) { return c.setting.signal_wp_deg; });
    if (iv.size() != 4 || sv.size() != 4)
        throw SchemaError("CHSH record must cross 4 idler with 4 signal waveplate angles");
    auto check_complement = [&](const std::vector<double>& v, const char* side) {
        if (std::fabs(v[2] - v[0] - 45.0) > tol || std::fabs(v[3] - v[1] - 45.0) > tol)
            throw SchemaError(std::string("CHSH ") + side +
                              " angles are not base pairs plus orthogonal complements");
    };
    check_complement(iv, "idler");
    check_complement(sv, "signal");
    return {{iv[0], iv[1], iv[2], iv[3]}, {sv[0], sv[1], sv[2], sv[3]}};
}

} // namespace detail

// CHSH S from a 16-setting record: S = E(a,b) - E(a,b') + E(a',b) + E(a',b'),
// each correlator E = [C(a,b) + C(a_perp,b_perp) - C(a,b_perp) - C(a_perp,b)]
// normalized by the four counts. Sign convention gives +2*sqrt(2) for phi+
// at the canonical grid. Sigma assumes independent Poisson counts.
inline ChshResult chsh_s(const std::vector<SettingCounts>& counts) {
    const auto grid = detail::infer_grid(counts);
    const double tol = 0.01;
    auto count_at = [&](double iw, double sw) -> double {
        for (const auto& c : counts)
            if (std::fabs(c.setting.idler_wp_deg - iw) < tol &&
                std::fabs(c.setting.signal_wp_deg - sw) < tol)
                return static_cast<double>(c.coincidences);
        throw SchemaError("CHSH grid is missing a setting combination");
    };
    ChshResult res;
    double var_s = 0.0;
    int k = 0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double c_pp = count_at(grid.idler[i], grid.signal[j]);
            const double c_mm = count_at(grid.idler[i + 2], grid.signal[j + 2]);
            const double c_pm = count_at(grid.idler[i], grid.signal[j + 2]);
            const double c_mp = count_at(grid.idler[i + 2], grid.signal[j]);
            const double plus = c_pp + c_mm, minus = c_pm + c_mp;
            const double total = plus + minus;
            if (!(total > 0.0))
                throw DegenerateDataError("correlator has zero total coincidences");
            const double e = (plus - minus) / total;
            // d/dC of (P-M)/(P+M): 2M/T^2 for plus counts, -2P/T^2 for minus.
            var_s += 4.0 * plus * minus / (total * total * total);
            res.correlators[k] = e;
            res.total_coincidences += total;
            // Correlator sign pattern: E(a,b) - E(a,b') + E(a',b) + E(a',b').
            res.s_value += (i == 0 && j == 1) ? -e : e;
            ++k;
        }
    }
    res.sigma = std::sqrt(var_s);
    return res;
}

// Bootstrap re-estimate of sigma: resamples each count as Poisson(observed)
// and takes the standard deviation of the recomputed S values.
inline double chsh_sigma_bootstrap(const std::vector<SettingCounts>& counts, int resamples,
                                   RandomStream& rng) {
    if (resamples < 2) throw std::invalid_argument("need at least 2 resamples");
    std::vector<SettingCounts> work = counts;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < counts.size(); ++i)
            work[i].coincidences = rng.poisson(static_cast<double>(counts[i].coincidences));
        const double s = chsh_s(work).s_value;
        sum += s;
        sum2 += s * s;
    }
    const double mean = sum / resamples;
    return std::sqrt(std::max(0.0, sum2 / resamples - mean * mean));
}

namespace detail {

// Locates the count at a rectilinear/diagonal combination; waveplate angles:
// H=0, V=45, D=22.5, A=67.5.
inline double basis_count(const std::vector<SettingCounts>& counts, double signal_wp,
                          double idler_wp) {
    for (const auto& c : counts)
        if (std::fabs(c.setting.signal_wp_deg - signal_wp) < 0.01 &&
            std::fabs(c.setting.idler_wp_deg - idler_wp) < 0.01)
            return static_cast<double>(c.coincidences);
    throw SchemaError("fidelity record is missing a basis combination");
}

} // namespace detail

// Fidelity bounds to phi+ from the eight rectilinear/diagonal coincidence
// counts. Probabilities are normalized within each basis group, then
//   F >= (P_HH+P_VV)/2 + (P_DD+P_AA) - 1/2 - sqrt(P_HV P_VH)
//   F <= same + sqrt(P_HV P_VH)
// and the symmetric pair with the roles of the bases exchanged; the reported
// interval is the envelope (min of lowers, max of uppers), clamped to [0,1]
// with the raw values preserved.
inline FidelityBounds fidelity_bounds(const std::vector<SettingCounts>& counts) {
    const double H = 0.0, V = 45.0, D = 22.5, A = 67.5;
    const double c_hh = detail::basis_count(counts, H, H);
    const double c_hv = detail::basis_count(counts, H, V);
    const double c_vh = detail::basis_count(counts, V, H);
    const double c_vv = detail::basis_count(counts, V, V);
    const double c_dd = detail::basis_count(counts, D, D);
    const double c_da = detail::basis_count(counts, D, A);
    const double c_ad = detail::basis_count(counts, A, D);
    const double c_aa = detail::basis_count(counts, A, A);
    const double rect = c_hh + c_hv + c_vh + c_vv;
    const double diag = c_dd + c_da + c_ad + c_aa;
    if (!(rect > 0.0) || !(diag > 0.0))
        throw DegenerateDataError("fidelity basis group has zero coincidences");
    const double p_hh = c_hh / rect, p_hv = c_hv / rect, p_vh = c_vh / rect, p_vv = c_vv / rect;
    const double p_dd = c_dd / diag, p_da = c_da / diag, p_ad = c_ad / diag, p_aa = c_aa / diag;
    const double core1 = (p_hh + p_vv) / 2.0 + (p_dd + p_aa) - 0.5;
    const double cross1 = std::sqrt(p_hv * p_vh);
    const double core2 = (p_dd + p_aa) / 2.0 + (p_hh + p_vv) - 0.5;
    const double cross2 = std::sqrt(p_ad * p_da);
    FidelityBounds b;
    b.raw_lower = std::min(core1 - cross1, core2 - cross2);
    b.raw_upper = std::max(core1 + cross1, core2 + cross2);
    b.lower = std::min(1.0, std::max(0.0, b.raw_lower));
    b.upper = std::min(1.0, std::max(0.0, b.raw_upper));
    return b;
}

// The eight fidelity settings (signal, idler) in waveplate degrees.
inline std::vector<WaveplateSetting> fidelity_settings() {
    const double H = 0.0, V = 45.0, D = 22.5, A = 67.5;
    // WaveplateSetting stores idler first.
    return {{H, H}, {V, H}, {H, V}, {V, V}, {D, D}, {A, D}, {D, A}, {A, A}};
}

// The 16 CHSH settings built from base waveplate angles (idler a, a'; signal
// b, b') by crossing each base set with its orthogonal complements (+45 deg).
inline std::vector<WaveplateSetting> chsh_settings(double idler_a_wp = 0.0,
                                                   double idler_ap_wp = 22.5,
                                                   double signal_b_wp = 11.25,
                                                   double signal_bp_wp = 33.75) {
    const std::array<double, 4> iv{idler_a_wp, idler_ap_wp, idler_a_wp + 45.0, idler_ap_wp + 45.0};
    const std::array<double, 4> sv{signal_b_wp, signal_bp_wp, signal_b_wp + 45.0,
                                   signal_bp_wp + 45.0};
    std::vector<WaveplateSetting> out;
    out.reserve(16);
    for (double i : iv)
        for (double s : sv) out.push_back({i, s});
    return out;
}

} // namespace entsim
