#pragma once

// Scenario files: one human-editable key/value text file with nested
// sections describes the plant, source, detectors, compensation, and
// schedule. Line 1 must carry the schema identifier "scenario-version 1";
// unknown keys are schema errors so typos cannot silently change physics.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "entsim/apc.hpp"
#include "entsim/detection.hpp"
#include "entsim/errors.hpp"
#include "entsim/fiber.hpp"
#include "entsim/format.hpp"
#include "entsim/source.hpp"

namespace entsim {

struct Schedule {
    std::vector<std::string> rotation;  // visited in order, cyclically
    double t_local_s = 300.0;           // dwell on the local path
    double dwell_s = 300.0;             // dwell on deployed paths
    double t_path_switch_s = 0.5;       // switch actuation time
    double t_apc_budget_s = 20.0;       // per-routine compensation budget
    double settle_time_s = 0.25;        // waveplate move + settle per setting
    double scramble_outbound_rad = 0.0; // applied to a newly selected deployed path
    double scramble_inbound_rad = 0.0;  // applied when returning to local
    double idler_a_wp = 0.0;            // CHSH base waveplate angles
    double idler_ap_wp = 22.5;
    double signal_b_wp = 11.25;
    double signal_bp_wp = 33.75;
    std::vector<std::pair<double, double>> recalibration_windows;  // (start, duration)

    void validate() const {
        if (rotation.empty()) throw SchemaError("schedule rotation is empty");
        if (!(t_local_s > 0.0 && dwell_s > 0.0)) throw SchemaError("dwell times must be > 0");
        if (!(t_path_switch_s >= 0.0 && settle_time_s >= 0.0))
            throw SchemaError("negative schedule time");
        for (const auto& [start, dur] : recalibration_windows)
            if (!(start >= 0.0 && dur > 0.0)) throw SchemaError("invalid recalibration window");
    }
};

// Per-path scenario block: the plant description plus acquisition knobs.
struct PathScenario {
    NetworkPath path;
    double pump_power_uw = 450.0;
    double integration_time_s = 1.0;
    double probe_gain_db = 0.0;
    double probe_detuning_nm = 0.0;
};

struct Scenario {
    int version = 1;
    std::string name = "unnamed";
    std::uint64_t seed = 1;
    SourceParams source;
    DetectorParams detectors;
    double idler_loss_db = 1.5;
    ApcConfig apc;
    bool apc_enabled = true;
    double detuning_coeff = 3.6e-6;
    Schedule schedule;
    double fidelity_threshold_kpi = 0.85;
    std::vector<PathScenario> paths;  // declaration order is part of the contract
    std::uint64_t file_hash = 0;      // FNV-1a of the raw scenario bytes

    const PathScenario* find_path(const std::string& n) const {
        for (const auto& p : paths)
            if (p.path.name == n) return &p;
        return nullptr;
    }

    void validate() const {
        source.validate();
        detectors.validate();
        apc.validate();
        schedule.validate();
        if (paths.empty()) throw SchemaError("scenario declares no paths");
        if (!(idler_loss_db >= 0.0)) throw SchemaError("negative idler loss");
        for (const auto& ps : paths) {
            ps.path.validate();
            if (!(ps.pump_power_uw > 0.0)) throw SchemaError("pump power must be > 0");
            if (!(ps.integration_time_s > 0.0)) throw SchemaError("integration time must be > 0");
        }
        for (const auto& name : schedule.rotation)
            if (!find_path(name)) throw SchemaError("rotation references unknown path '" + name + "'");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_num(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw SchemaError("cannot parse number '" + v + "' in " + where);
    }
}

// Parses "kind key=val key=val ..." element lines.
inline std::map<std::string, std::string> parse_kv_tokens(std::istringstream& is,
                                                           const std::string& where) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw SchemaError("expected key=value token, got '" + tok + "' in " + where);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

inline FiberSegment parse_fiber(const std::string& value, const std::string& where) {
    std::istringstream is(value);
    auto kv = parse_kv_tokens(is, where);
    FiberSegment f;
    for (const auto& [k, v] : kv) {
        if (k == "length_km") f.length_km = parse_num(v, where);
        else if (k == "atten_db_km") f.attenuation_db_per_km = parse_num(v, where);
        else if (k == "drift") f.drift_diffusion = parse_num(v, where);
        else if (k == "jump_rate") f.jump_rate = parse_num(v, where);
        else if (k == "jump_mag") f.jump_magnitude = parse_num(v, where);
        else if (k == "label") f.label = v;
        else if (k == "lumped") {
            std::istringstream ls(v);
            std::string item;
            while (std::getline(ls, item, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw SchemaError("lumped losses must be pos_km:loss_db in " + where);
                f.lumped.push_back({parse_num(item.substr(0, colon), where),
                                    parse_num(item.substr(colon + 1), where)});
            }
        } else {
            throw SchemaError("unknown fiber key '" + k + "' in " + where);
        }
    }
    return f;
}

inline PathComponent parse_component(const std::string& value, const std::string& where) {
    std::istringstream is(value);
    std::string kind;
    is >> kind;
    PathComponent c;
    if (kind == "switch") c.kind = ComponentKind::optical_switch;
    else if (kind == "oadm") c.kind = ComponentKind::oadm;
    else if (kind == "patch_panel") c.kind = ComponentKind::patch_panel;
    else if (kind == "apc_injector") c.kind = ComponentKind::apc_injector;
    else if (kind == "apc_compensator") c.kind = ComponentKind::apc_compensator;
    else throw SchemaError("unknown component kind '" + kind + "' in " + where);
    for (const auto& [k, v] : parse_kv_tokens(is, where)) {
        if (k == "loss_db") c.insertion_loss_db = parse_num(v, where);
        else if (k == "pdl_db") c.pdl_db = parse_num(v, where);
        else throw SchemaError("unknown component key '" + k + "' in " + where);
    }
    return c;
}

inline void parse_classical(const std::string& value, ClassicalChannel& c,
                            const std::string& where) {
    std::istringstream is(value);
    std::string state;
    is >> state;
    if (state == "off") {
        c.enabled = false;
        return;
    }
    if (state != "on") throw SchemaError("classical must start with on/off in " + where);
    c.enabled = true;
    for (const auto& [k, v] : parse_kv_tokens(is, where)) {
        if (k == "wavelength_nm") c.wavelength_nm = parse_num(v, where);
        else if (k == "power_dbm") c.launch_power_dbm = parse_num(v, where);
        else if (k == "direction") {
            if (v == "co") c.direction = PropagationDirection::co;
            else if (v == "counter") c.direction = PropagationDirection::counter;
            else throw SchemaError("direction must be co or counter in " + where);
        } else if (k == "atten_db_km") c.attenuation_db_per_km = parse_num(v, where);
        else if (k == "raman_coeff") c.raman_coeff = parse_num(v, where);
        else if (k == "raman_asymmetry") c.raman_asymmetry = parse_num(v, where);
        else throw SchemaError("unknown classical key '" + k + "' in " + where);
    }
}

} // namespace detail

// Parses scenario text. The first non-empty line must be the schema
// identifier; every key is checked against the schema.
inline Scenario parse_scenario(const std::string& text) {
    Scenario sc;
    sc.file_hash = fnv1a64(text);
    std::istringstream in(text);
    std::string line;
    bool version_seen = false;
    std::string section;
    PathScenario* current_path = nullptr;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (!version_seen) {
            std::istringstream vs(line);
            std::string tag;
            int ver = 0;
            vs >> tag >> ver;
            if (tag != "scenario-version" || ver != 1)
                throw SchemaError("first line must be 'scenario-version 1'");
            sc.version = ver;
            version_seen = true;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') throw SchemaError("unterminated section header at " + where);
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.rfind("path ", 0) == 0) {
                const std::string pname = detail::trim(section.substr(5));
                if (pname.empty()) throw SchemaError("path section without a name at " + where);
                if (sc.find_path(pname)) throw SchemaError("duplicate path '" + pname + "'");
                sc.paths.emplace_back();
                current_path = &sc.paths.back();
                current_path->path.name = pname;
                current_path->pump_power_uw = sc.source.pump_power_uw;
            } else {
                current_path = nullptr;
                static const std::set<std::string> known{"meta",      "source", "detectors",
                                                         "idler",     "apc",    "schedule",
                                                         "kpi"};
                if (!known.count(section))
                    throw SchemaError("unknown section '" + section + "' at " + where);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw SchemaError("expected key = value at " + where);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto num = [&] { return detail::parse_num(value, where); };

        if (current_path) {
            auto& ps = *current_path;
            if (key == "fiber") ps.path.elements.emplace_back(detail::parse_fiber(value, where));
            else if (key == "component")
                ps.path.elements.emplace_back(detail::parse_component(value, where));
            else if (key == "classical") detail::parse_classical(value, ps.path.classical, where);
            else if (key == "pump_power_uw") ps.pump_power_uw = num();
            else if (key == "integration_time_s") ps.integration_time_s = num();
            else if (key == "probe_gain_db") ps.probe_gain_db = num();
            else if (key == "probe_detuning_nm") ps.probe_detuning_nm = num();
            else throw SchemaError("unknown path key '" + key + "' at " + where);
        } else if (section == "meta") {
            if (key == "name") sc.name = value;
            else if (key == "seed") sc.seed = static_cast<std::uint64_t>(num());
            else throw SchemaError("unknown meta key '" + key + "' at " + where);
        } else if (section == "source") {
            if (key == "brightness_coeff") sc.source.brightness_coeff = num();
            else if (key == "pump_power_uw") sc.source.pump_power_uw = num();
            else if (key == "coupling_power_mw") sc.source.coupling_power_mw = num();
            else if (key == "coherence_time_s") sc.source.coherence_time_s = num();
            else if (key == "heralding_efficiency") sc.source.heralding_efficiency = num();
            else if (key == "intrinsic_visibility") sc.source.intrinsic_visibility = num();
            else if (key == "signal_wavelength_nm") sc.source.signal_wavelength_nm = num();
            else if (key == "idler_wavelength_nm") sc.source.idler_wavelength_nm = num();
            else throw SchemaError("unknown source key '" + key + "' at " + where);
        } else if (section == "detectors") {
            if (key == "efficiency") sc.detectors.efficiency = num();
            else if (key == "dark_rate") sc.detectors.dark_rate = num();
            else if (key == "coincidence_window_s") sc.detectors.coincidence_window_s = num();
            else if (key == "timing_jitter_s") sc.detectors.timing_jitter_s = num();
            else throw SchemaError("unknown detectors key '" + key + "' at " + where);
        } else if (section == "idler") {
            if (key == "loss_db") sc.idler_loss_db = num();
            else throw SchemaError("unknown idler key '" + key + "' at " + where);
        } else if (section == "apc") {
            if (key == "enabled") sc.apc_enabled = (value == "true" || value == "1");
            else if (key == "fidelity_threshold") sc.apc.fidelity_threshold = num();
            else if (key == "max_iterations") sc.apc.max_iterations = static_cast<int>(num());
            else if (key == "iteration_time_s") sc.apc.iteration_time_s = num();
            else if (key == "overhead_s") sc.apc.overhead_s = num();
            else if (key == "probe_launch_dbm") sc.apc.probe_launch_dbm = num();
            else if (key == "probe_power_floor_dbm") sc.apc.probe_power_floor_dbm = num();
            else if (key == "probe_noise_base") sc.apc.probe_noise_base = num();
            else if (key == "detuning_coeff") sc.detuning_coeff = num();
            else if (key == "probes") {
                sc.apc.probe_states.clear();
                std::istringstream ps(value);
                std::string p;
                while (ps >> p) {
                    if (p == "H") sc.apc.probe_states.push_back(PolarizationVector::horizontal());
                    else if (p == "V") sc.apc.probe_states.push_back(PolarizationVector::vertical());
                    else if (p == "D") sc.apc.probe_states.push_back(PolarizationVector::diagonal());
                    else if (p == "R")
                        sc.apc.probe_states.push_back(PolarizationVector::circular_right());
                    else throw SchemaError("unknown probe '" + p + "' at " + where);
                }
            } else {
                throw SchemaError("unknown apc key '" + key + "' at " + where);
            }
        } else if (section == "schedule") {
            if (key == "rotation") {
                std::istringstream rs(value);
                std::string p;
                while (std::getline(rs, p, ',')) {
                    p = detail::trim(p);
                    if (!p.empty()) sc.schedule.rotation.push_back(p);
                }
            } else if (key == "t_local_s") sc.schedule.t_local_s = num();
            else if (key == "dwell_s") sc.schedule.dwell_s = num();
            else if (key == "t_path_switch_s") sc.schedule.t_path_switch_s = num();
            else if (key == "t_apc_budget_s") sc.schedule.t_apc_budget_s = num();
            else if (key == "settle_time_s") sc.schedule.settle_time_s = num();
            else if (key == "scramble_outbound_rad") sc.schedule.scramble_outbound_rad = num();
            else if (key == "scramble_inbound_rad") sc.schedule.scramble_inbound_rad = num();
            else if (key == "idler_a_wp") sc.schedule.idler_a_wp = num();
            else if (key == "idler_ap_wp") sc.schedule.idler_ap_wp = num();
            else if (key == "signal_b_wp") sc.schedule.signal_b_wp = num();
            else if (key == "signal_bp_wp") sc.schedule.signal_bp_wp = num();
            else if (key == "recalibration") {
                std::istringstream ws(value);
                std::string item;
                while (std::getline(ws, item, ',')) {
                    const auto colon = item.find(':');
                    if (colon == std::string::npos)
                        throw SchemaError("recalibration windows are start_s:duration_s at " + where);
                    sc.schedule.recalibration_windows.emplace_back(
                        detail::parse_num(item.substr(0, colon), where),
                        detail::parse_num(item.substr(colon + 1), where));
                }
            } else {
                throw SchemaError("unknown schedule key '" + key + "' at " + where);
            }
        } else if (section == "kpi") {
            if (key == "fidelity_threshold") sc.fidelity_threshold_kpi = num();
            else throw SchemaError("unknown kpi key '" + key + "' at " + where);
        } else {
            throw SchemaError("key '" + key + "' outside any section at " + where);
        }
    }
    if (!version_seen) throw SchemaError("scenario file is empty");
    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::string& filename) {
    std::ifstream f(filename, std::ios::binary);
    if (!f) throw SchemaError("cannot open scenario file '" + filename + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str());
}

} // namespace entsim
