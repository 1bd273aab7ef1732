#pragma once

// Shared utilities for the test suite: scenario file locations, exact-count
// construction from analytic probabilities, and temporary-file scaffolding
// for the CLI tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "entsim/detection.hpp"
#include "entsim/polarization.hpp"

#ifndef ENTSIM_SCENARIO_DIR
#error "ENTSIM_SCENARIO_DIR must be defined by the build"
#endif

namespace test_helpers {

inline std::string scenario_file(const std::string& name) {
    return std::string(ENTSIM_SCENARIO_DIR) + "/" + name;
}

// Counts built directly from analytic coincidence probabilities at a large
// scale, so estimator math can be checked without sampling noise.
inline std::vector<entsim::SettingCounts> exact_counts(
    const entsim::TwoQubitState& state, const std::vector<entsim::WaveplateSetting>& settings,
    double scale) {
    std::vector<entsim::SettingCounts> out;
    out.reserve(settings.size());
    for (const auto& w : settings) {
        const double alpha = entsim::basis_angle_from_waveplate(w.signal_wp_deg);
        const double beta = entsim::basis_angle_from_waveplate(w.idler_wp_deg);
        entsim::SettingCounts c;
        c.setting = w;
        c.integration_time_s = 1.0;
        c.coincidences = static_cast<std::uint64_t>(
            std::llround(entsim::coincidence_probability(state, alpha, beta) * scale));
        c.singles_signal = static_cast<std::uint64_t>(std::llround(0.5 * scale));
        c.singles_idler = static_cast<std::uint64_t>(std::llround(0.5 * scale));
        out.push_back(c);
    }
    return out;
}

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path dir;

    TempDir() {
        std::random_device rd;
        const auto base = std::filesystem::temp_directory_path();
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate = base / ("entsim_test_" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                dir = candidate;
                return;
            }
        }
        throw std::runtime_error("cannot create scratch directory");
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }
};

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
}

} // namespace test_helpers
