#pragma once

// Output formatting helpers. All floating-point values leaving the library
// (CSV, JSON, ndjson) go through fmt_g6 so repeated runs produce
// byte-identical files; platform-dependent math stays inside tolerance
// tests, never in golden comparisons.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>

namespace entsim {

// Fixed 6-significant-digit representation; stable across runs.
inline std::string fmt_g6(double v) {
    if (std::isnan(v)) return "null";
    if (std::isinf(v)) return v > 0 ? "1e999" : "-1e999";
    if (v == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

// FNV-1a 64-bit, used to stamp outputs with a scenario content hash.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace entsim
