#pragma once

// Detection and coincidence counting.
//
// expected_rates turns a delivered two-qubit state plus link budgets into
// per-setting true-coincidence, singles, and accidental rates; sample_counts
// draws Poisson counts from those rates. Settings are stored as waveplate
// mechanical angles; the basis conversion happens only through
// basis_angle_from_waveplate().

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "entsim/errors.hpp"
#include "entsim/format.hpp"
#include "entsim/polarization.hpp"
#include "entsim/rng.hpp"

namespace entsim {

struct DetectorParams {
    double efficiency = 0.9;            // detection probability at the detector
    double dark_rate = 100.0;           // counts/s per detector
    double coincidence_window_s = 1e-9; // ~ photon coherence time
    double timing_jitter_s = 5e-11;     // metadata; folded into the window

    void validate() const {
        if (!(efficiency > 0.0 && efficiency <= 1.0))
            throw std::invalid_argument("detector efficiency outside (0, 1]");
        if (!(dark_rate >= 0.0)) throw std::invalid_argument("negative dark rate");
        if (!(coincidence_window_s > 0.0)) throw std::invalid_argument("window must be > 0");
    }
};

// Per-arm efficiency/transmission budget (heralding x detector folded with
// the path's linear transmission).
struct ArmBudget {
    double transmission = 1.0;  // linear path transmission
    double efficiency = 0.45;   // heralding x detector
};

struct WaveplateSetting {
    double idler_wp_deg = 0.0;
    double signal_wp_deg = 0.0;
};

struct SettingRates {
    WaveplateSetting setting;
    double true_coincidence = 0.0;  // pairs/s in the peak
    double accidental = 0.0;        // flat-floor coincidences/s
    double singles_signal = 0.0;    // counts/s at the signal-arm analyzer port
    double singles_idler = 0.0;
};

struct SettingCounts {
    WaveplateSetting setting;
    std::uint64_t coincidences = 0;
    std::uint64_t singles_signal = 0;
    std::uint64_t singles_idler = 0;
    double integration_time_s = 1.0;
};

struct CoincidenceRecord {
    std::string path_name;
    double timestamp_s = 0.0;           // simulated time of acquisition start
    bool classical_on = false;
    double coincidence_window_s = 1e-9; // needed to reconstruct the floor
    std::vector<SettingCounts> settings;
};

// Expected rates for each requested setting. True coincidences follow
// pair_rate x arm budgets x coincidence probability; singles add dark counts
// and (signal arm) Raman noise; accidentals are singles_i x singles_s x window.
inline std::vector<SettingRates> expected_rates(const TwoQubitState& state,
                                                double source_pair_rate,
                                                const ArmBudget& signal_arm,
                                                const ArmBudget& idler_arm,
                                                const DetectorParams& det,
                                                double raman_rate_at_detector,
                                                const std::vector<WaveplateSetting>& settings) {
    det.validate();
    if (!(source_pair_rate > 0.0)) throw std::invalid_argument("pair rate must be > 0");
    const double pair_det = source_pair_rate * signal_arm.efficiency * signal_arm.transmission *
                            idler_arm.efficiency * idler_arm.transmission;
    // Unpolarized noise splits evenly between analyzer ports.
    const double raman_port = raman_rate_at_detector * det.efficiency / 2.0;
    std::vector<SettingRates> out;
    out.reserve(settings.size());
    for (const auto& w : settings) {
        const double alpha = basis_angle_from_waveplate(w.signal_wp_deg);
        const double beta = basis_angle_from_waveplate(w.idler_wp_deg);
        SettingRates r;
        r.setting = w;
        r.true_coincidence = pair_det * coincidence_probability(state, alpha, beta);
        r.singles_signal = source_pair_rate * signal_arm.efficiency * signal_arm.transmission *
                               singles_probability(state, Arm::signal, alpha) +
                           det.dark_rate + raman_port;
        r.singles_idler = source_pair_rate * idler_arm.efficiency * idler_arm.transmission *
                              singles_probability(state, Arm::idler, beta) +
                          det.dark_rate;
        r.accidental = r.singles_signal * r.singles_idler * det.coincidence_window_s;
        out.push_back(r);
    }
    return out;
}

// Independent Poisson draws per setting. The coincidence peak contains the
// true pairs plus the accidental floor inside the window.
inline std::vector<SettingCounts> sample_counts(const std::vector<SettingRates>& rates,
                                                double integration_time_s,
                                                RandomStream& rng) {
    if (!(integration_time_s > 0.0)) throw std::invalid_argument("integration time must be > 0");
    std::vector<SettingCounts> out;
    out.reserve(rates.size());
    for (const auto& r : rates) {
        SettingCounts c;
        c.setting = r.setting;
        c.integration_time_s = integration_time_s;
        c.coincidences = rng.poisson((r.true_coincidence + r.accidental) * integration_time_s);
        c.singles_signal = rng.poisson(r.singles_signal * integration_time_s);
        c.singles_idler = rng.poisson(r.singles_idler * integration_time_s);
        out.push_back(c);
    }
    return out;
}

// Measured signal-to-noise: averaged peak coincidence rate over the averaged
// accidental floor reconstructed from the singles. +inf when the floor is
// exactly zero.
inline double snr(const CoincidenceRecord& rec) {
    if (rec.settings.empty()) throw DegenerateDataError("record has no settings");
    double peak = 0.0, floor = 0.0;
    for (const auto& s : rec.settings) {
        if (!(s.integration_time_s > 0.0)) throw DegenerateDataError("non-positive integration time");
        peak += static_cast<double>(s.coincidences) / s.integration_time_s;
        floor += (static_cast<double>(s.singles_signal) / s.integration_time_s) *
                 (static_cast<double>(s.singles_idler) / s.integration_time_s) *
                 rec.coincidence_window_s;
    }
    if (floor == 0.0) return std::numeric_limits<double>::infinity();
    return peak / floor;
}

// --- serialization -------------------------------------------------------

inline std::string to_csv(const CoincidenceRecord& rec) {
    std::ostringstream os;
    os << "# path=" << rec.path_name << " t=" << fmt_g6(rec.timestamp_s)
       << " classical=" << (rec.classical_on ? "on" : "off")
       << " window=" << fmt_g6(rec.coincidence_window_s) << "\n";
    os << "idler_wp_deg,signal_wp_deg,coincidences,singles_idler,singles_signal,integration_s\n";
    for (const auto& s : rec.settings) {
        os << fmt_g6(s.setting.idler_wp_deg) << ',' << fmt_g6(s.setting.signal_wp_deg) << ','
           << s.coincidences << ',' << s.singles_idler << ',' << s.singles_signal << ','
           << fmt_g6(s.integration_time_s) << "\n";
    }
    return os.str();
}

inline std::string to_json(const CoincidenceRecord& rec) {
    std::ostringstream os;
    os << "{\"path\":\"" << json_escape(rec.path_name) << "\",\"t\":" << fmt_g6(rec.timestamp_s)
       << ",\"classical_on\":" << (rec.classical_on ? "true" : "false")
       << ",\"window_s\":" << fmt_g6(rec.coincidence_window_s) << ",\"settings\":[";
    for (std::size_t i = 0; i < rec.settings.size(); ++i) {
        const auto& s = rec.settings[i];
        if (i) os << ',';
        os << "{\"idler_wp\":" << fmt_g6(s.setting.idler_wp_deg)
           << ",\"signal_wp\":" << fmt_g6(s.setting.signal_wp_deg)
           << ",\"cc\":" << s.coincidences << ",\"si\":" << s.singles_idler
           << ",\"ss\":" << s.singles_signal << ",\"T\":" << fmt_g6(s.integration_time_s) << '}';
    }
    os << "]}";
    return os.str();
}

inline CoincidenceRecord record_from_csv(std::istream& in) {
    CoincidenceRecord rec;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string tok;
            while (hs >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
                if (k == "path") rec.path_name = v;
                else if (k == "t") rec.timestamp_s = std::stod(v);
                else if (k == "classical") rec.classical_on = (v == "on");
                else if (k == "window") rec.coincidence_window_s = std::stod(v);
            }
            continue;
        }
        if (!header_seen) {  // column header row
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw SchemaError("coincidence CSV row needs 6 columns");
        SettingCounts s;
        try {
            s.setting.idler_wp_deg = std::stod(cells[0]);
            s.setting.signal_wp_deg = std::stod(cells[1]);
            s.coincidences = std::stoull(cells[2]);
            s.singles_idler = std::stoull(cells[3]);
            s.singles_signal = std::stoull(cells[4]);
            s.integration_time_s = std::stod(cells[5]);
        } catch (const std::exception&) {
            throw SchemaError("malformed coincidence CSV row: " + line);
        }
        rec.settings.push_back(s);
    }
    return rec;
}

} // namespace entsim
