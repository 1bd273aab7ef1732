#pragma once

// Command-line front end. Subcommands:
//   budget    per-element link-loss table for one or all paths
//   chsh      one compensation + one 16-setting CHSH acquisition
//   fidelity  one compensation + one 8-setting fidelity-bound acquisition
//   campaign  scheduled multi-hour run emitting an ndjson event stream
//   kpi       reduce a campaign ndjson stream to operator KPIs
// Exit codes: 0 success, 1 usage, 2 malformed scenario/input, 3 compensation
// inoperable (probe power below floor), 4 degenerate data.

#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "entsim/errors.hpp"
#include "entsim/orchestrator.hpp"
#include "entsim/scenario.hpp"

namespace entsim::cli {

namespace detail {

inline void write_output(const std::string& out_path, const std::string& content,
                         std::ostream& fallback) {
    if (out_path.empty() || out_path == "-") {
        fallback << content;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw SchemaError("cannot open output file '" + out_path + "'");
    f << content;
}

inline std::string comp_json(const std::optional<CompensationResult>& comp) {
    if (!comp) return "null";
    std::string s = "{";
    s += std::string("\"converged\":") + (comp->converged ? "true" : "false");
    s += ",\"iterations\":" + std::to_string(comp->iterations);
    s += ",\"duration_s\":" + fmt_g6(comp->duration_s);
    s += ",\"start_fidelity\":" + fmt_g6(comp->start_fidelity);
    s += ",\"end_fidelity\":" + fmt_g6(comp->end_fidelity);
    s += "}";
    return s;
}

struct OneShot {
    Scenario sc;
    std::uint64_t seed = 0;
    std::optional<CompensationResult> comp;
    CoincidenceRecord record;
};

// Shared acquisition flow of the chsh/fidelity subcommands: select the path
// (which perturbs it like any real switch event), recompensate unless
// disabled, then acquire one block.
inline OneShot one_shot(const std::string& scenario_file, const std::string& path_name,
                        std::optional<std::uint64_t> seed_opt, double integration_override,
                        bool no_apc, const std::string& classical_override, bool chsh_block) {
    OneShot r;
    r.sc = load_scenario(scenario_file);
    if (no_apc) r.sc.apc_enabled = false;
    if (!classical_override.empty()) {
        bool found = false;
        for (auto& ps : r.sc.paths)
            if (ps.path.name == path_name) {
                ps.path.classical.enabled = (classical_override == "on");
                found = true;
            }
        if (!found) throw SchemaError("unknown path '" + path_name + "'");
    }
    r.seed = seed_opt.value_or(r.sc.seed);
    Testbed tb(r.sc, r.seed);
    tb.select(path_name);
    if (r.sc.apc_enabled) r.comp = tb.compensate_current();
    PathScenario& ps = tb.path(path_name);
    const double integration =
        integration_override > 0.0 ? integration_override : ps.integration_time_s;
    r.record.path_name = path_name;
    r.record.timestamp_s = tb.now();
    r.record.classical_on = ps.path.classical.enabled;
    r.record.coincidence_window_s = r.sc.detectors.coincidence_window_s;
    r.record.settings =
        tb.acquire(chsh_block ? tb.chsh_grid() : fidelity_settings(), integration);
    return r;
}

inline std::string stamp(const Scenario& sc, std::uint64_t seed) {
    return "# scenario=" + sc.name + " hash=" + hex64(sc.file_hash) +
           " seed=" + std::to_string(seed) + "\n";
}

inline CampaignEvent event_from_json(const nlohmann::json& j) {
    CampaignEvent e;
    const std::string kind = j.at("event").get<std::string>();
    auto num = [&j](const char* key, double dflt) {
        if (!j.contains(key) || j.at(key).is_null()) return dflt;
        return j.at(key).get<double>();
    };
    e.t = num("t", 0.0);
    if (j.contains("path")) e.path = j.at("path").get<std::string>();
    if (kind == "header") {
        e.kind = CampaignEvent::Kind::header;
        e.duration_s = num("duration_s", 0.0);
        if (j.contains("seed")) e.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("apc_enabled")) e.apc_enabled = j.at("apc_enabled").get<bool>();
    } else if (kind == "switch") {
        e.kind = CampaignEvent::Kind::path_switch;
        if (j.contains("from")) e.from = j.at("from").get<std::string>();
    } else if (kind == "apc") {
        e.kind = CampaignEvent::Kind::apc;
        e.comp.converged = j.at("converged").get<bool>();
        e.comp.iterations = j.at("iterations").get<int>();
        e.comp.duration_s = num("duration_s", 0.0);
        e.comp.start_fidelity = num("start_fidelity", 0.0);
        e.comp.end_fidelity = num("end_fidelity", 0.0);
    } else if (kind == "chsh") {
        e.kind = CampaignEvent::Kind::chsh;
        e.s_value = num("s", 0.0);
        e.s_sigma = num("sigma", 0.0);
        e.snr_value = num("snr", std::numeric_limits<double>::quiet_NaN());
        e.total_coincidences = num("coincidences", 0.0);
        if (j.contains("classical_on")) e.classical_on = j.at("classical_on").get<bool>();
    } else if (kind == "fidelity") {
        e.kind = CampaignEvent::Kind::fidelity;
        e.bounds.lower = num("f_lower", 0.0);
        e.bounds.upper = num("f_upper", 1.0);
        e.bounds.raw_lower = num("raw_lower", 0.0);
        e.bounds.raw_upper = num("raw_upper", 1.0);
    } else if (kind == "end") {
        e.kind = CampaignEvent::Kind::end;
    } else {
        throw SchemaError("unknown campaign event '" + kind + "'");
    }
    return e;
}

inline std::vector<CampaignEvent> events_from_ndjson(std::istream& in) {
    std::vector<CampaignEvent> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            events.push_back(event_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& ex) {
            throw SchemaError("campaign stream line " + std::to_string(lineno) + ": " +
                              ex.what());
        }
    }
    if (events.empty()) throw SchemaError("campaign stream is empty");
    return events;
}

} // namespace detail

// Runs the tool; returns the process exit code. `out`/`err` default to the
// process streams but are injectable for tests.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Entanglement-distribution simulator for switched metropolitan fiber"};
    app.require_subcommand(1);

    // --- budget ---
    auto* budget = app.add_subcommand("budget", "Per-element link-loss table");
    std::string b_scenario, b_path, b_out;
    budget->add_option("--scenario", b_scenario, "Scenario file")->required();
    budget->add_option("--path", b_path, "Only this path (default: all)");
    budget->add_option("--out", b_out, "Write to file instead of stdout");

    // --- chsh / fidelity ---
    struct ShotArgs {
        std::string scenario, path, out, format = "csv", classical;
        std::uint64_t seed = 0;
        bool seed_set = false;
        double integration = 0.0;
        bool no_apc = false;
    };
    ShotArgs ch, fi;
    auto add_shot_options = [](CLI::App* cmd, ShotArgs& a) {
        cmd->add_option("--scenario", a.scenario, "Scenario file")->required();
        cmd->add_option("--path", a.path, "Path to measure")->required();
        auto* seed_opt = cmd->add_option("--seed", a.seed, "Random seed (default: scenario)");
        cmd->parse_complete_callback([&a, seed_opt] { a.seed_set = seed_opt->count() > 0; });
        cmd->add_option("--integration", a.integration, "Seconds per setting (default: scenario)");
        cmd->add_flag("--no-apc", a.no_apc, "Skip compensation");
        cmd->add_option("--classical", a.classical, "Override the classical channel")
            ->check(CLI::IsMember({"on", "off"}));
        cmd->add_option("--out", a.out, "Write the full record to a file");
        cmd->add_option("--format", a.format, "Record format")
            ->check(CLI::IsMember({"csv", "json"}));
    };
    auto* chsh_cmd = app.add_subcommand("chsh", "One CHSH acquisition on one path");
    add_shot_options(chsh_cmd, ch);
    auto* fid_cmd = app.add_subcommand("fidelity", "One fidelity-bound acquisition on one path");
    add_shot_options(fid_cmd, fi);

    // --- campaign ---
    auto* camp = app.add_subcommand("campaign", "Scheduled run emitting an ndjson event stream");
    std::string c_scenario, c_path, c_out;
    std::uint64_t c_seed = 0;
    double c_duration = 3600.0;
    bool c_no_apc = false;
    int c_sweep = 1, c_jobs = 1;
    camp->add_option("--scenario", c_scenario, "Scenario file")->required();
    camp->add_option("--path", c_path,
                     "Rotate only reference <-> this path (default: scenario schedule)");
    auto* c_seed_opt = camp->add_option("--seed", c_seed, "Base random seed (default: scenario)");
    camp->add_option("--duration", c_duration, "Simulated seconds")->check(CLI::PositiveNumber);
    camp->add_flag("--no-apc", c_no_apc, "Disable compensation for the whole run");
    camp->add_option("--out", c_out, "Output ndjson file (required with --sweep > 1)");
    camp->add_option("--sweep", c_sweep, "Number of campaigns, seeds base+0..K-1")
        ->check(CLI::PositiveNumber);
    camp->add_option("--jobs", c_jobs, "Worker threads for --sweep")->check(CLI::PositiveNumber);

    // --- kpi ---
    auto* kpi_cmd = app.add_subcommand("kpi", "Reduce a campaign ndjson stream to KPIs");
    std::string k_in, k_out;
    double k_threshold = 0.85;
    kpi_cmd->add_option("--in", k_in, "Campaign ndjson file ('-' for stdin)")->required();
    kpi_cmd->add_option("--threshold", k_threshold, "Fidelity threshold for downtime");
    kpi_cmd->add_option("--out", k_out, "Write the KPI report to a file");

    std::vector<const char*> argv;
    argv.push_back("entsim");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        const int code = app.exit(e, msg, msg);  // format without touching std streams
        (code == 0 ? out : err) << msg.str();
        return code == 0 ? 0 : 1;
    }

    try {
        if (budget->parsed()) {
            const Scenario sc = load_scenario(b_scenario);
            std::ostringstream os;
            os << "# scenario=" << sc.name << " hash=" << hex64(sc.file_hash) << "\n";
            bool found = false;
            for (const auto& ps : sc.paths) {
                if (!b_path.empty() && ps.path.name != b_path) continue;
                found = true;
                SourceParams src = sc.source;
                src.pump_power_uw = ps.pump_power_uw;
                os << "path " << ps.path.name << ": " << fmt_g6(path_loss_db(ps.path))
                   << " dB total over " << fmt_g6(ps.path.total_fiber_km()) << " km fiber, "
                   << fmt_g6(ps.path.total_pdl_db()) << " dB PDL, pair rate "
                   << fmt_g6(pair_rate(src)) << " /s, raman "
                   << fmt_g6(raman_noise_rate(ps.path)) << " /s\n";
                os << "  position_km    loss_db     cum_db  element\n";
                for (const auto& row : link_budget_report(ps.path)) {
                    os << "  " << std::setw(11) << fmt_g6(row.position_km) << "  "
                       << std::setw(9) << fmt_g6(row.loss_db) << "  " << std::setw(9)
                       << fmt_g6(row.cumulative_db) << "  " << row.label << "\n";
                }
            }
            if (!b_path.empty() && !found) throw SchemaError("unknown path '" + b_path + "'");
            detail::write_output(b_out, os.str(), out);
            return 0;
        }

        if (chsh_cmd->parsed()) {
            const auto r = detail::one_shot(
                ch.scenario, ch.path, ch.seed_set ? std::optional<std::uint64_t>(ch.seed) : std::nullopt,
                ch.integration, ch.no_apc, ch.classical, true);
            const ChshResult res = chsh_s(r.record.settings);
            const double snr_v = snr(r.record);
            out << detail::stamp(r.sc, r.seed);
            out << "path " << ch.path << " classical="
                << (r.record.classical_on ? "on" : "off") << "\n";
            out << "S = " << fmt_g6(res.s_value) << " +/- " << fmt_g6(res.sigma) << "\n";
            out << "snr = " << fmt_g6(snr_v) << "\n";
            out << "coincidences = "
                << static_cast<std::uint64_t>(res.total_coincidences) << "\n";
            if (r.comp)
                out << "compensation: converged=" << (r.comp->converged ? "yes" : "no")
                    << " iterations=" << r.comp->iterations << " duration_s="
                    << fmt_g6(r.comp->duration_s) << " end_fidelity="
                    << fmt_g6(r.comp->end_fidelity) << "\n";
            if (!ch.out.empty()) {
                if (ch.format == "csv") {
                    detail::write_output(ch.out, detail::stamp(r.sc, r.seed) + to_csv(r.record),
                                         out);
                } else {
                    std::string j = "{\"scenario\":\"" + json_escape(r.sc.name) + "\"";
                    j += ",\"scenario_hash\":\"" + hex64(r.sc.file_hash) + "\"";
                    j += ",\"seed\":" + std::to_string(r.seed);
                    j += ",\"s\":" + fmt_g6(res.s_value);
                    j += ",\"sigma\":" + fmt_g6(res.sigma);
                    j += ",\"snr\":" + entsim::detail::jnum(snr_v);
                    j += ",\"compensation\":" + detail::comp_json(r.comp);
                    j += ",\"record\":" + to_json(r.record) + "}\n";
                    detail::write_output(ch.out, j, out);
                }
            }
            return 0;
        }

        if (fid_cmd->parsed()) {
            const auto r = detail::one_shot(
                fi.scenario, fi.path, fi.seed_set ? std::optional<std::uint64_t>(fi.seed) : std::nullopt,
                fi.integration, fi.no_apc, fi.classical, false);
            const FidelityBounds b = fidelity_bounds(r.record.settings);
            out << detail::stamp(r.sc, r.seed);
            out << "path " << fi.path << "\n";
            out << "F_lower = " << fmt_g6(b.lower) << "\n";
            out << "F_upper = " << fmt_g6(b.upper) << "\n";
            out << "raw = [" << fmt_g6(b.raw_lower) << ", " << fmt_g6(b.raw_upper) << "]\n";
            if (r.comp)
                out << "compensation: converged=" << (r.comp->converged ? "yes" : "no")
                    << " iterations=" << r.comp->iterations << " duration_s="
                    << fmt_g6(r.comp->duration_s) << " end_fidelity="
                    << fmt_g6(r.comp->end_fidelity) << "\n";
            if (!fi.out.empty()) {
                if (fi.format == "csv") {
                    detail::write_output(fi.out, detail::stamp(r.sc, r.seed) + to_csv(r.record),
                                         out);
                } else {
                    std::string j = "{\"scenario\":\"" + json_escape(r.sc.name) + "\"";
                    j += ",\"scenario_hash\":\"" + hex64(r.sc.file_hash) + "\"";
                    j += ",\"seed\":" + std::to_string(r.seed);
                    j += ",\"f_lower\":" + fmt_g6(b.lower);
                    j += ",\"f_upper\":" + fmt_g6(b.upper);
                    j += ",\"raw_lower\":" + fmt_g6(b.raw_lower);
                    j += ",\"raw_upper\":" + fmt_g6(b.raw_upper);
                    j += ",\"compensation\":" + detail::comp_json(r.comp);
                    j += ",\"record\":" + to_json(r.record) + "}\n";
                    detail::write_output(fi.out, j, out);
                }
            }
            return 0;
        }

        if (camp->parsed()) {
            Scenario sc = load_scenario(c_scenario);
            CampaignOptions opt;
            opt.duration_s = c_duration;
            if (c_no_apc) opt.apc_enabled = false;
            const std::uint64_t base_seed = c_seed_opt->count() > 0 ? c_seed : sc.seed;
            if (!c_path.empty()) {
                if (!sc.find_path(c_path)) throw SchemaError("unknown path '" + c_path + "'");
                const std::string reference = sc.paths.front().path.name;
                opt.rotation = (c_path == reference)
                                   ? std::vector<std::string>{reference}
                                   : std::vector<std::string>{reference, c_path};
            }
            if (c_sweep > 1 && c_out.empty())
                throw SchemaError("--sweep needs --out to name the output files");

            std::vector<std::vector<CampaignEvent>> results(c_sweep);
            std::atomic<int> next{0};
            auto worker = [&] {
                for (int k = next.fetch_add(1); k < c_sweep; k = next.fetch_add(1)) {
                    CampaignOptions o = opt;
                    o.seed = base_seed + static_cast<std::uint64_t>(k);
                    results[k] = run_campaign(sc, o);
                }
            };
            if (c_jobs <= 1 || c_sweep == 1) {
                worker();
            } else {
                std::vector<std::thread> pool;
                const int n = std::min(c_jobs, c_sweep);
                pool.reserve(n);
                for (int i = 0; i < n; ++i) pool.emplace_back(worker);
                for (auto& th : pool) th.join();
            }
            for (int k = 0; k < c_sweep; ++k) {
                const std::string text = to_ndjson(results[k]);
                const std::string file =
                    c_sweep == 1 ? c_out : c_out + "." + std::to_string(k);
                detail::write_output(file, text, out);
                if (!file.empty() && file != "-") {
                    const KpiReport rep = kpi(results[k], sc.fidelity_threshold_kpi);
                    out << "{\"campaign\":" << k << ",\"seed\":"
                        << base_seed + static_cast<std::uint64_t>(k) << ",\"events\":"
                        << results[k].size() << ",\"downtime_fraction\":"
                        << entsim::detail::jnum(rep.downtime_fraction)
                        << ",\"comp_mean_s\":" << entsim::detail::jnum(rep.comp_mean_s)
                        << "}\n";
                }
            }
            return 0;
        }

        if (kpi_cmd->parsed()) {
            std::vector<CampaignEvent> events;
            if (k_in == "-") {
                events = detail::events_from_ndjson(std::cin);
            } else {
                std::ifstream f(k_in, std::ios::binary);
                if (!f) throw SchemaError("cannot open campaign stream '" + k_in + "'");
                events = detail::events_from_ndjson(f);
            }
            detail::write_output(k_out, to_json(kpi(events, k_threshold)) + "\n", out);
            return 0;
        }
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ApcInoperableError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const DegenerateDataError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    }
    return 1;
}

} // namespace entsim::cli
