#pragma once

// Campaign orchestration. A Testbed owns the mutable plant (per-path
// birefringence and compensator corrections), a simulated clock, and the
// random streams; run_campaign() drives it through the schedule rotation,
// compensating after every reconfiguration and interleaving CHSH and
// fidelity-bound acquisitions during each dwell. The resulting event stream
// serializes to newline-delimited JSON and reduces to operator KPIs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "entsim/apc.hpp"
#include "entsim/detection.hpp"
#include "entsim/errors.hpp"
#include "entsim/estimators.hpp"
#include "entsim/fiber.hpp"
#include "entsim/format.hpp"
#include "entsim/scenario.hpp"
#include "entsim/source.hpp"

namespace entsim {

struct CampaignEvent {
    enum class Kind { header, path_switch, apc, chsh, fidelity, end };
    Kind kind = Kind::header;
    double t = 0.0;    // simulated seconds since campaign start
    std::string path;  // switch/apc/chsh/fidelity events

    // header
    std::string scenario_name;
    std::uint64_t scenario_hash = 0;
    std::uint64_t seed = 0;
    bool apc_enabled = true;
    double duration_s = 0.0;
    std::vector<std::string> rotation;

    // switch
    std::string from;

    // apc
    CompensationResult comp;

    // chsh
    double s_value = 0.0, s_sigma = 0.0, snr_value = 0.0;
    double total_coincidences = 0.0;
    bool classical_on = false;

    // fidelity
    FidelityBounds bounds;
};

// The plant under simulation: clock, per-path channel state, RNG streams.
// All randomness is drawn from four child streams of the campaign seed, so a
// given (scenario, seed, schedule) replays identically.
class Testbed {
  public:
    Testbed(const Scenario& scenario, std::uint64_t seed)
        : sc_(scenario),
          drift_rng_(RandomStream(seed).child(1)),
          counts_rng_(RandomStream(seed).child(2)),
          apc_rng_(RandomStream(seed).child(3)),
          scramble_rng_(RandomStream(seed).child(4)) {
        sc_.validate();
    }

    const Scenario& scenario() const { return sc_; }
    double now() const { return t_; }
    const std::string& current() const { return current_; }

    PathScenario& path(const std::string& name) {
        for (auto& p : sc_.paths)
            if (p.path.name == name) return p;
        throw SchemaError("unknown path '" + name + "'");
    }

    // Advances the clock; birefringence on every path drifts in steps of at
    // most one second regardless of how coarse the requested jump is.
    void advance_to(double t_new) {
        while (t_ < t_new) {
            const double dt = std::min(1.0, t_new - t_);
            for (auto& ps : sc_.paths) evolve_birefringence(ps.path, dt, drift_rng_);
            t_ += dt;
        }
    }

    // Routes the source output onto `name`. The actuation takes the scheduled
    // switch time and mechanically perturbs the newly selected path; the
    // reference path (first declared) is disturbed far less than a deployed
    // route whose connectors and splices all get re-stressed.
    void select(const std::string& name) {
        PathScenario& ps = path(name);
        advance_to(t_ + sc_.schedule.t_path_switch_s);
        const bool to_reference = (ps.path.name == sc_.paths.front().path.name);
        const double magnitude = to_reference ? sc_.schedule.scramble_inbound_rad
                                              : sc_.schedule.scramble_outbound_rad;
        scramble_birefringence(ps.path, magnitude, scramble_rng_);
        current_ = ps.path.name;
    }

    ApcConfig apc_config_for(const PathScenario& ps) const {
        ApcConfig cfg = sc_.apc;
        cfg.probe_gain_db = ps.probe_gain_db;
        cfg.probe_detuning_nm = ps.probe_detuning_nm;
        return cfg;
    }

    // Runs one compensation routine on the currently selected path. Simulated
    // time (and therefore drift on every path) advances while it runs.
    CompensationResult compensate_current() {
        if (current_.empty()) throw SchemaError("no path selected");
        PathScenario& ps = path(current_);
        return compensate(
            ps.path, apc_config_for(ps), apc_rng_,
            [this](double dt) { advance_to(t_ + dt); }, sc_.schedule.t_apc_budget_s);
    }

    struct Delivered {
        TwoQubitState state = bell_phi_plus();
        ArmBudget signal_arm, idler_arm;
        double raman_rate = 0.0;  // noise photons/s reaching the signal node
        double source_pair_rate = 0.0;
    };

    // The two-qubit state and budgets delivered by a path right now: source
    // output, the path's effective rotation + PDL on the signal arm, the
    // compensator's residual wavelength mismatch as a depolarizing factor.
    Delivered delivered(const PathScenario& ps) const {
        SourceParams src = sc_.source;
        src.pump_power_uw = ps.pump_power_uw;
        Delivered d;
        d.source_pair_rate = pair_rate(src);
        const ArmTransformResult arm =
            apply_arm_transform(emitted_state(src), effective_transform(ps.path), Arm::signal);
        d.state = arm.state;
        if (sc_.apc_enabled && ps.probe_detuning_nm > 0.0) {
            const double pen = detuning_penalty(ps.probe_detuning_nm, ps.path.total_fiber_km(),
                                                sc_.detuning_coeff);
            d.state = depolarize(d.state, 1.0 - pen);
        }
        const double eff = sc_.source.heralding_efficiency * sc_.detectors.efficiency;
        d.signal_arm = {arm.transmission, eff};
        d.idler_arm = {std::pow(10.0, -sc_.idler_loss_db / 10.0), eff};
        d.raman_rate = raman_noise_rate(ps.path);
        return d;
    }

    // Analytic per-setting rates for the path as delivered right now.
    std::vector<SettingRates> expected(const PathScenario& ps,
                                       const std::vector<WaveplateSetting>& settings) const {
        const Delivered d = delivered(ps);
        return expected_rates(d.state, d.source_pair_rate, d.signal_arm, d.idler_arm,
                              sc_.detectors, d.raman_rate, settings);
    }

    // One acquisition block on the current path. Per setting: waveplates move
    // and settle, then counts integrate against the settled plant state.
    std::vector<SettingCounts> acquire(const std::vector<WaveplateSetting>& settings,
                                       double integration_time_s) {
        if (current_.empty()) throw SchemaError("no path selected");
        PathScenario& ps = path(current_);
        std::vector<SettingCounts> out;
        out.reserve(settings.size());
        for (const auto& w : settings) {
            advance_to(t_ + sc_.schedule.settle_time_s);
            const auto rates = expected(ps, {w});
            auto counts = sample_counts(rates, integration_time_s, counts_rng_);
            advance_to(t_ + integration_time_s);
            out.push_back(counts.front());
        }
        return out;
    }

    std::vector<WaveplateSetting> chsh_grid() const {
        return chsh_settings(sc_.schedule.idler_a_wp, sc_.schedule.idler_ap_wp,
                             sc_.schedule.signal_b_wp, sc_.schedule.signal_bp_wp);
    }

  private:
    Scenario sc_;
    std::string current_;
    double t_ = 0.0;
    RandomStream drift_rng_, counts_rng_, apc_rng_, scramble_rng_;
};

struct CampaignOptions {
    std::uint64_t seed = 1;
    double duration_s = 3600.0;
    std::vector<std::string> rotation;     // empty: use the scenario schedule
    std::optional<bool> apc_enabled;       // override the scenario setting
};

// Runs one campaign: cycle through the rotation; on every path change,
// actuate the switch and recompensate; fill each dwell with alternating
// CHSH and fidelity-bound blocks as long as a whole block still fits.
inline std::vector<CampaignEvent> run_campaign(Scenario sc, const CampaignOptions& opt) {
    if (opt.apc_enabled.has_value()) sc.apc_enabled = *opt.apc_enabled;
    const std::vector<std::string> rotation =
        opt.rotation.empty() ? sc.schedule.rotation : opt.rotation;
    for (const auto& name : rotation)
        if (!sc.find_path(name)) throw SchemaError("rotation references unknown path '" + name + "'");
    if (!(opt.duration_s > 0.0)) throw SchemaError("campaign duration must be > 0");

    std::vector<CampaignEvent> ev;
    {
        CampaignEvent h;
        h.kind = CampaignEvent::Kind::header;
        h.scenario_name = sc.name;
        h.scenario_hash = sc.file_hash;
        h.seed = opt.seed;
        h.apc_enabled = sc.apc_enabled;
        h.duration_s = opt.duration_s;
        h.rotation = rotation;
        ev.push_back(h);
    }

    Testbed tb(sc, opt.seed);
    const auto chsh_grid = tb.chsh_grid();
    const auto fid_grid = fidelity_settings();
    std::size_t ri = 0;
    while (tb.now() < opt.duration_s) {
        const std::string next = rotation[ri % rotation.size()];
        ++ri;
        if (next != tb.current()) {
            CampaignEvent se;
            se.kind = CampaignEvent::Kind::path_switch;
            se.t = tb.now();
            se.from = tb.current();
            se.path = next;
            tb.select(next);
            ev.push_back(se);
        }
        if (tb.scenario().apc_enabled) {
            CampaignEvent ae;
            ae.kind = CampaignEvent::Kind::apc;
            ae.t = tb.now();
            ae.path = next;
            ae.comp = tb.compensate_current();
            ev.push_back(ae);
        }
        PathScenario& ps = tb.path(next);
        const bool is_reference = (next == tb.scenario().paths.front().path.name);
        const double dwell =
            is_reference ? tb.scenario().schedule.t_local_s : tb.scenario().schedule.dwell_s;
        const double dwell_end = tb.now() + dwell;
        const double per_setting = tb.scenario().schedule.settle_time_s + ps.integration_time_s;
        bool do_chsh = true;
        while (true) {
            const double block = (do_chsh ? 16.0 : 8.0) * per_setting;
            if (tb.now() + block > dwell_end + 1e-9) break;
            CampaignEvent be;
            be.t = tb.now();
            be.path = next;
            const auto counts =
                tb.acquire(do_chsh ? chsh_grid : fid_grid, ps.integration_time_s);
            if (do_chsh) {
                be.kind = CampaignEvent::Kind::chsh;
                const ChshResult r = chsh_s(counts);
                be.s_value = r.s_value;
                be.s_sigma = r.sigma;
                be.total_coincidences = r.total_coincidences;
                be.classical_on = ps.path.classical.enabled;
                CoincidenceRecord rec{next, be.t, ps.path.classical.enabled,
                                      tb.scenario().detectors.coincidence_window_s, counts};
                be.snr_value = snr(rec);
            } else {
                be.kind = CampaignEvent::Kind::fidelity;
                be.bounds = fidelity_bounds(counts);
            }
            ev.push_back(be);
            do_chsh = !do_chsh;
        }
        tb.advance_to(dwell_end);
    }
    CampaignEvent ee;
    ee.kind = CampaignEvent::Kind::end;
    ee.t = tb.now();
    ev.push_back(ee);
    return ev;
}

// --- serialization ---------------------------------------------------------

namespace detail {

// JSON number: finite values via fixed %.6g formatting, non-finite as null.
inline std::string jnum(double x) {
    if (!std::isfinite(x)) return "null";
    return fmt_g6(x);
}

} // namespace detail

inline std::string to_ndjson(const CampaignEvent& e) {
    std::string s = "{";
    auto add = [&s](const std::string& piece) { s += piece; };
    switch (e.kind) {
        case CampaignEvent::Kind::header: {
            add("\"event\":\"header\"");
            add(",\"scenario\":\"" + json_escape(e.scenario_name) + "\"");
            add(",\"scenario_hash\":\"" + hex64(e.scenario_hash) + "\"");
            add(",\"seed\":" + std::to_string(e.seed));
            add(std::string(",\"apc_enabled\":") + (e.apc_enabled ? "true" : "false"));
            add(",\"duration_s\":" + detail::jnum(e.duration_s));
            add(",\"rotation\":[");
            for (std::size_t i = 0; i < e.rotation.size(); ++i) {
                if (i) add(",");
                add("\"" + json_escape(e.rotation[i]) + "\"");
            }
            add("]");
            break;
        }
        case CampaignEvent::Kind::path_switch:
            add("\"event\":\"switch\",\"t\":" + detail::jnum(e.t));
            add(",\"from\":\"" + json_escape(e.from) + "\"");
            add(",\"path\":\"" + json_escape(e.path) + "\"");
            break;
        case CampaignEvent::Kind::apc:
            add("\"event\":\"apc\",\"t\":" + detail::jnum(e.t));
            add(",\"path\":\"" + json_escape(e.path) + "\"");
            add(std::string(",\"converged\":") + (e.comp.converged ? "true" : "false"));
            add(",\"iterations\":" + std::to_string(e.comp.iterations));
            add(",\"duration_s\":" + detail::jnum(e.comp.duration_s));
            add(",\"start_fidelity\":" + detail::jnum(e.comp.start_fidelity));
            add(",\"end_fidelity\":" + detail::jnum(e.comp.end_fidelity));
            break;
        case CampaignEvent::Kind::chsh:
            add("\"event\":\"chsh\",\"t\":" + detail::jnum(e.t));
            add(",\"path\":\"" + json_escape(e.path) + "\"");
            add(std::string(",\"classical_on\":") + (e.classical_on ? "true" : "false"));
            add(",\"s\":" + detail::jnum(e.s_value));
            add(",\"sigma\":" + detail::jnum(e.s_sigma));
            add(",\"snr\":" + detail::jnum(e.snr_value));
            add(",\"coincidences\":" +
                std::to_string(static_cast<std::uint64_t>(e.total_coincidences)));
            break;
        case CampaignEvent::Kind::fidelity:
            add("\"event\":\"fidelity\",\"t\":" + detail::jnum(e.t));
            add(",\"path\":\"" + json_escape(e.path) + "\"");
            add(",\"f_lower\":" + detail::jnum(e.bounds.lower));
            add(",\"f_upper\":" + detail::jnum(e.bounds.upper));
            add(",\"raw_lower\":" + detail::jnum(e.bounds.raw_lower));
            add(",\"raw_upper\":" + detail::jnum(e.bounds.raw_upper));
            break;
        case CampaignEvent::Kind::end:
            add("\"event\":\"end\",\"t\":" + detail::jnum(e.t));
            break;
    }
    s += "}";
    return s;
}

inline std::string to_ndjson(const std::vector<CampaignEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += to_ndjson(e);
        out += "\n";
    }
    return out;
}

// --- KPI reduction ---------------------------------------------------------

struct PathKpi {
    std::string name;
    int chsh_blocks = 0;
    double s_mean = 0.0, s_std = 0.0;      // over blocks (population std)
    double sigma_mean = 0.0;               // mean per-block statistical sigma
    double snr_mean = 0.0;
    int fidelity_blocks = 0;
    double f_lower_mean = 0.0, f_lower_min = 1.0;
};

struct KpiReport {
    double total_time_s = 0.0;
    double fidelity_threshold = 0.85;
    // Fraction of campaign time the delivered lower fidelity bound held above
    // the threshold / above 0.90, counting compensation routines as link-down.
    double fraction_above_threshold = 0.0;
    double fraction_above_090 = 0.0;
    double downtime_fraction = 0.0;  // 1 - fraction_above_threshold
    int compensations = 0;
    int compensations_converged = 0;
    double comp_mean_s = 0.0, comp_p95_s = 0.0;
    double comp_mean_iterations = 0.0;
    double comp_mean_end_fidelity = 0.0;
    std::vector<PathKpi> per_path;
};

namespace detail {

inline double merged_length(std::vector<std::pair<double, double>> iv, double lo, double hi) {
    for (auto& [a, b] : iv) {
        a = std::max(a, lo);
        b = std::min(b, hi);
    }
    std::sort(iv.begin(), iv.end());
    double total = 0.0, cur_a = 0.0, cur_b = -1.0;
    bool open = false;
    for (const auto& [a, b] : iv) {
        if (b <= a) continue;
        if (!open || a > cur_b) {
            if (open) total += cur_b - cur_a;
            cur_a = a;
            cur_b = b;
            open = true;
        } else {
            cur_b = std::max(cur_b, b);
        }
    }
    if (open) total += cur_b - cur_a;
    return total;
}

} // namespace detail

// Reduces a campaign event stream to operator KPIs. The delivered-fidelity
// timeline is the step interpolation of the fidelity blocks (each value holds
// until the next block); compensation routines count as link downtime.
inline KpiReport kpi(const std::vector<CampaignEvent>& events, double fidelity_threshold = 0.85) {
    KpiReport rep;
    rep.fidelity_threshold = fidelity_threshold;
    double t_end = 0.0;
    for (const auto& e : events) {
        t_end = std::max(t_end, e.t);
        if (e.kind == CampaignEvent::Kind::end) t_end = e.t;
    }
    rep.total_time_s = t_end;
    if (!(t_end > 0.0)) throw DegenerateDataError("campaign has no duration");

    std::vector<std::pair<double, double>> fid_steps;  // (t, f_lower)
    std::vector<std::pair<double, double>> apc_iv;     // (t, t + duration)
    std::vector<double> comp_durations;
    std::map<std::string, PathKpi> per_path;
    for (const auto& e : events) {
        switch (e.kind) {
            case CampaignEvent::Kind::apc: {
                rep.compensations += 1;
                rep.compensations_converged += e.comp.converged ? 1 : 0;
                comp_durations.push_back(e.comp.duration_s);
                rep.comp_mean_iterations += e.comp.iterations;
                rep.comp_mean_end_fidelity += e.comp.end_fidelity;
                apc_iv.emplace_back(e.t, e.t + e.comp.duration_s);
                break;
            }
            case CampaignEvent::Kind::chsh: {
                auto& p = per_path[e.path];
                p.name = e.path;
                p.chsh_blocks += 1;
                p.s_mean += e.s_value;
                p.s_std += e.s_value * e.s_value;
                p.sigma_mean += e.s_sigma;
                p.snr_mean += std::isfinite(e.snr_value) ? e.snr_value : 0.0;
                break;
            }
            case CampaignEvent::Kind::fidelity: {
                auto& p = per_path[e.path];
                p.name = e.path;
                p.fidelity_blocks += 1;
                p.f_lower_mean += e.bounds.lower;
                p.f_lower_min = std::min(p.f_lower_min, e.bounds.lower);
                fid_steps.emplace_back(e.t, e.bounds.lower);
                break;
            }
            default:
                break;
        }
    }
    if (rep.compensations > 0) {
        double sum = 0.0;
        for (double d : comp_durations) sum += d;
        rep.comp_mean_s = sum / rep.compensations;
        std::sort(comp_durations.begin(), comp_durations.end());
        const std::size_t idx = static_cast<std::size_t>(
            std::ceil(0.95 * static_cast<double>(comp_durations.size())));
        rep.comp_p95_s = comp_durations[std::min(comp_durations.size() - 1, idx ? idx - 1 : 0)];
        rep.comp_mean_iterations /= rep.compensations;
        rep.comp_mean_end_fidelity /= rep.compensations;
    }
    for (auto& [name, p] : per_path) {
        if (p.chsh_blocks > 0) {
            const double n = p.chsh_blocks;
            p.s_mean /= n;
            p.s_std = std::sqrt(std::max(0.0, p.s_std / n - p.s_mean * p.s_mean));
            p.sigma_mean /= n;
            p.snr_mean /= n;
        }
        if (p.fidelity_blocks > 0) p.f_lower_mean /= p.fidelity_blocks;
        rep.per_path.push_back(p);
    }

    // Step-interpolated time below each threshold; the stretch before the
    // first fidelity block inherits its value.
    auto below_intervals = [&](double thr) {
        std::vector<std::pair<double, double>> iv = apc_iv;
        if (fid_steps.empty()) {
            iv.emplace_back(0.0, t_end);  // no fidelity data: link never verified
            return iv;
        }
        for (std::size_t i = 0; i < fid_steps.size(); ++i) {
            const double a = (i == 0) ? 0.0 : fid_steps[i].first;
            const double b = (i + 1 < fid_steps.size()) ? fid_steps[i + 1].first : t_end;
            if (fid_steps[i].second < thr) iv.emplace_back(a, b);
        }
        return iv;
    };
    rep.fraction_above_threshold =
        1.0 - detail::merged_length(below_intervals(fidelity_threshold), 0.0, t_end) / t_end;
    rep.fraction_above_090 =
        1.0 - detail::merged_length(below_intervals(0.90), 0.0, t_end) / t_end;
    rep.downtime_fraction = 1.0 - rep.fraction_above_threshold;
    return rep;
}

inline std::string to_json(const KpiReport& r) {
    std::string s = "{";
    s += "\"total_time_s\":" + detail::jnum(r.total_time_s);
    s += ",\"fidelity_threshold\":" + detail::jnum(r.fidelity_threshold);
    s += ",\"fraction_above_threshold\":" + detail::jnum(r.fraction_above_threshold);
    s += ",\"fraction_above_090\":" + detail::jnum(r.fraction_above_090);
    s += ",\"downtime_fraction\":" + detail::jnum(r.downtime_fraction);
    s += ",\"compensations\":" + std::to_string(r.compensations);
    s += ",\"compensations_converged\":" + std::to_string(r.compensations_converged);
    s += ",\"comp_mean_s\":" + detail::jnum(r.comp_mean_s);
    s += ",\"comp_p95_s\":" + detail::jnum(r.comp_p95_s);
    s += ",\"comp_mean_iterations\":" + detail::jnum(r.comp_mean_iterations);
    s += ",\"comp_mean_end_fidelity\":" + detail::jnum(r.comp_mean_end_fidelity);
    s += ",\"per_path\":[";
    for (std::size_t i = 0; i < r.per_path.size(); ++i) {
        const auto& p = r.per_path[i];
        if (i) s += ",";
        s += "{\"path\":\"" + json_escape(p.name) + "\"";
        s += ",\"chsh_blocks\":" + std::to_string(p.chsh_blocks);
        s += ",\"s_mean\":" + detail::jnum(p.s_mean);
        s += ",\"s_std\":" + detail::jnum(p.s_std);
        s += ",\"sigma_mean\":" + detail::jnum(p.sigma_mean);
        s += ",\"snr_mean\":" + detail::jnum(p.snr_mean);
        s += ",\"fidelity_blocks\":" + std::to_string(p.fidelity_blocks);
        s += ",\"f_lower_mean\":" + detail::jnum(p.f_lower_mean);
        s += ",\"f_lower_min\":" + detail::jnum(p.f_lower_min);
        s += "}";
    }
    s += "]}";
    return s;
}

} // namespace entsim
