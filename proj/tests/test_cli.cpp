#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "entsim/cli.hpp"
#include "helpers.hpp"

using test_helpers::read_file;
using test_helpers::scenario_file;
using test_helpers::TempDir;
using test_helpers::write_file;

namespace {

struct RunResult {
    int code = -1;
    std::string out, err;
};

RunResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    RunResult r;
    r.code = entsim::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Extracts the number following "prefix" on its line, e.g. "S = 2.84 +/- ...".
double value_after(const std::string& text, const std::string& prefix) {
    const auto pos = text.find(prefix);
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + prefix.size()));
}

} // namespace

TEST_CASE("help and usage errors", "[cli]") {
    const auto help = run_cli({"--help"});
    REQUIRE(help.code == 0);
    REQUIRE(help.out.find("campaign") != std::string::npos);
    REQUIRE(run_cli({}).code == 1);
    REQUIRE(run_cli({"frobnicate"}).code == 1);
    REQUIRE(run_cli({"chsh", "--scenario", scenario_file("ideal.scenario")}).code == 1);
    REQUIRE(run_cli({"campaign", "--scenario", scenario_file("ideal.scenario"),
                     "--duration", "-5"})
                .code == 1);
}

TEST_CASE("budget prints per-path loss tables", "[cli]") {
    const auto r = run_cli({"budget", "--scenario", scenario_file("berlin.scenario")});
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("# scenario=berlin hash=") != std::string::npos);
    for (const char* p : {"local", "hhi", "dotti", "dotti2x", "strausberg"})
        REQUIRE(r.out.find(std::string("path ") + p + ":") != std::string::npos);
    REQUIRE(r.out.find("2.9035 dB total") != std::string::npos);
    REQUIRE(r.out.find("45 dB total") != std::string::npos);

    const auto one =
        run_cli({"budget", "--scenario", scenario_file("berlin.scenario"), "--path", "hhi"});
    REQUIRE(one.code == 0);
    REQUIRE(one.out.find("path hhi:") != std::string::npos);
    REQUIRE(one.out.find("path local:") == std::string::npos);

    REQUIRE(run_cli({"budget", "--scenario", scenario_file("berlin.scenario"), "--path",
                     "ghost"})
                .code == 2);
    REQUIRE(run_cli({"budget", "--scenario", "/nonexistent.scenario"}).code == 2);
}

TEST_CASE("one-shot CHSH acquisition on the pristine scenario", "[cli]") {
    TempDir tmp;
    const std::string out_csv = tmp.path("rec.csv");
    const auto r = run_cli({"chsh", "--scenario", scenario_file("ideal.scenario"), "--path",
                            "bench", "--seed", "7", "--out", out_csv});
    REQUIRE(r.code == 0);
    const double s = value_after(r.out, "S = ");
    REQUIRE(s > 2.7);
    REQUIRE(s < 2.85);  // sampled value may sit a few sigma above 2*sqrt(2)
    REQUIRE(r.out.find("compensation: converged=yes") != std::string::npos);

    std::ifstream f(out_csv);
    const entsim::CoincidenceRecord rec = entsim::record_from_csv(f);
    REQUIRE(rec.path_name == "bench");
    REQUIRE(rec.settings.size() == 16);

    // the same seed writes byte-identical records
    const std::string out2 = tmp.path("rec2.csv");
    run_cli({"chsh", "--scenario", scenario_file("ideal.scenario"), "--path", "bench",
             "--seed", "7", "--out", out2});
    REQUIRE(read_file(out_csv) == read_file(out2));
}

TEST_CASE("one-shot records serialize to JSON", "[cli]") {
    TempDir tmp;
    const std::string out_json = tmp.path("rec.json");
    const auto r = run_cli({"chsh", "--scenario", scenario_file("ideal.scenario"), "--path",
                            "bench", "--seed", "3", "--format", "json", "--out", out_json});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(read_file(out_json));
    REQUIRE(j.at("scenario") == "ideal");
    REQUIRE(j.at("seed") == 3);
    REQUIRE(j.at("s").get<double>() > 2.7);
    REQUIRE(j.at("record").at("settings").size() == 16);
    REQUIRE(j.at("compensation").at("converged").get<bool>());

    const std::string fid_json = tmp.path("fid.json");
    const auto rf = run_cli({"fidelity", "--scenario", scenario_file("ideal.scenario"),
                             "--path", "bench", "--seed", "3", "--format", "json", "--out",
                             fid_json});
    REQUIRE(rf.code == 0);
    REQUIRE(value_after(rf.out, "F_lower = ") > 0.98);
    const auto jf = nlohmann::json::parse(read_file(fid_json));
    REQUIRE(jf.at("f_upper").get<double>() >= jf.at("f_lower").get<double>());
    REQUIRE(jf.at("record").at("settings").size() == 8);
}

TEST_CASE("--no-apc skips compensation and --classical overrides the channel", "[cli]") {
    const auto r = run_cli({"chsh", "--scenario", scenario_file("berlin.scenario"), "--path",
                            "dotti", "--seed", "5", "--no-apc"});
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("compensation:") == std::string::npos);

    const auto off = run_cli({"chsh", "--scenario", scenario_file("berlin.scenario"),
                              "--path", "dotti2x", "--seed", "5", "--classical", "off"});
    const auto on = run_cli({"chsh", "--scenario", scenario_file("berlin.scenario"),
                             "--path", "dotti2x", "--seed", "5", "--classical", "on"});
    REQUIRE(off.code == 0);
    REQUIRE(on.code == 0);
    REQUIRE(off.out.find("classical=off") != std::string::npos);
    REQUIRE(on.out.find("classical=on") != std::string::npos);
    REQUIRE(value_after(on.out, "snr = ") < value_after(off.out, "snr = "));
}

TEST_CASE("campaigns write deterministic ndjson and a summary line", "[cli]") {
    TempDir tmp;
    const std::string f1 = tmp.path("a.ndjson"), f2 = tmp.path("b.ndjson");
    const std::vector<std::string> base{"campaign", "--scenario",
                                        scenario_file("ideal.scenario"), "--duration", "650",
                                        "--seed", "9"};
    auto with_out = [&](const std::string& f) {
        auto v = base;
        v.push_back("--out");
        v.push_back(f);
        return v;
    };
    const auto r1 = run_cli(with_out(f1));
    const auto r2 = run_cli(with_out(f2));
    REQUIRE(r1.code == 0);
    REQUIRE(r2.code == 0);
    REQUIRE(read_file(f1) == read_file(f2));
    const std::string text = read_file(f1);
    REQUIRE(text.rfind("{\"event\":\"header\"", 0) == 0);
    REQUIRE(text.find("\"event\":\"end\"") != std::string::npos);
    // one machine-readable summary line per campaign on stdout
    const auto j = nlohmann::json::parse(r1.out);
    REQUIRE(j.at("seed") == 9);
    REQUIRE(j.at("events").get<int>() >= 4);
}

TEST_CASE("sweeps write one file per seed and match single runs", "[cli]") {
    TempDir tmp;
    const std::string base = tmp.path("sweep.ndjson");
    const auto r = run_cli({"campaign", "--scenario", scenario_file("ideal.scenario"),
                            "--duration", "650", "--seed", "9", "--sweep", "2", "--jobs", "2",
                            "--out", base});
    REQUIRE(r.code == 0);
    const std::string single = tmp.path("single.ndjson");
    run_cli({"campaign", "--scenario", scenario_file("ideal.scenario"), "--duration", "650",
             "--seed", "9", "--out", single});
    REQUIRE(read_file(base + ".0") == read_file(single));
    run_cli({"campaign", "--scenario", scenario_file("ideal.scenario"), "--duration", "650",
             "--seed", "10", "--out", single});
    REQUIRE(read_file(base + ".1") == read_file(single));
    // sequential and threaded sweeps agree byte for byte
    const std::string seq = tmp.path("seq.ndjson");
    run_cli({"campaign", "--scenario", scenario_file("ideal.scenario"), "--duration", "650",
             "--seed", "9", "--sweep", "2", "--jobs", "1", "--out", seq});
    REQUIRE(read_file(seq + ".0") == read_file(base + ".0"));
    REQUIRE(read_file(seq + ".1") == read_file(base + ".1"));

    REQUIRE(run_cli({"campaign", "--scenario", scenario_file("ideal.scenario"), "--sweep",
                     "2"})
                .code == 2);
}

TEST_CASE("--path restricts the rotation to reference plus target", "[cli]") {
    TempDir tmp;
    const std::string f = tmp.path("c.ndjson");
    const auto r = run_cli({"campaign", "--scenario", scenario_file("berlin.scenario"),
                            "--path", "dotti", "--duration", "650", "--out", f});
    REQUIRE(r.code == 0);
    const std::string text = read_file(f);
    REQUIRE(text.find("\"rotation\":[\"local\",\"dotti\"]") != std::string::npos);
    REQUIRE(run_cli({"campaign", "--scenario", scenario_file("berlin.scenario"), "--path",
                     "ghost", "--duration", "10"})
                .code == 2);
}

TEST_CASE("kpi reduces a campaign stream and rejects bad input", "[cli]") {
    TempDir tmp;
    const std::string f = tmp.path("run.ndjson");
    REQUIRE(run_cli({"campaign", "--scenario", scenario_file("ideal.scenario"), "--duration",
                     "650", "--seed", "4", "--out", f})
                .code == 0);
    const std::string report = tmp.path("kpi.json");
    const auto r = run_cli({"kpi", "--in", f, "--out", report});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(read_file(report));
    REQUIRE(j.at("total_time_s").get<double>() >= 650.0);
    REQUIRE(j.at("per_path").size() == 1);
    REQUIRE(j.at("per_path")[0].at("path") == "bench");
    REQUIRE(j.at("downtime_fraction").get<double>() >= 0.0);
    REQUIRE(j.at("downtime_fraction").get<double>() <= 1.0);
    REQUIRE(j.at("compensations").get<int>() >= 2);

    REQUIRE(run_cli({"kpi", "--in", tmp.path("missing.ndjson")}).code == 2);
    const std::string junk = tmp.path("junk.ndjson");
    write_file(junk, "this is not json\n");
    REQUIRE(run_cli({"kpi", "--in", junk}).code == 2);
    const std::string unknown = tmp.path("unknown.ndjson");
    write_file(unknown, "{\"event\":\"mystery\",\"t\":1}\n");
    REQUIRE(run_cli({"kpi", "--in", unknown}).code == 2);
    const std::string empty = tmp.path("empty.ndjson");
    write_file(empty, "");
    REQUIRE(run_cli({"kpi", "--in", empty}).code == 2);
    // parses but carries no usable duration: degenerate, not schema
    const std::string zero = tmp.path("zero.ndjson");
    write_file(zero, "{\"event\":\"end\",\"t\":0}\n");
    REQUIRE(run_cli({"kpi", "--in", zero}).code == 4);
}

TEST_CASE("compensation below the probe power floor exits with code 3", "[cli]") {
    TempDir tmp;
    const std::string sc = tmp.path("dark.scenario");
    write_file(sc,
               "scenario-version 1\n"
               "[meta]\nname = dark\nseed = 1\n"
               "[schedule]\nrotation = far\n"
               "[path far]\nfiber = length_km=200 atten_db_km=0.31\n");
    const auto r = run_cli({"chsh", "--scenario", sc, "--path", "far"});
    REQUIRE(r.code == 3);
    REQUIRE(r.err.find("below the floor") != std::string::npos);
    // budget on the same file still works: it never probes
    REQUIRE(run_cli({"budget", "--scenario", sc}).code == 0);
}
