#pragma once

// Error taxonomy mirrored by the CLI exit codes:
//   1 usage, 2 schema, 3 apc-inoperable, 4 degenerate data.

#include <stdexcept>
#include <string>

namespace entsim {

// Scenario file or input record violates the declared schema.
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Compensation cannot run (received probe power below the configured floor).
struct ApcInoperableError : std::runtime_error {
    explicit ApcInoperableError(const std::string& what) : std::runtime_error(what) {}
};

// Estimator input carries no usable information (zero counts, empty series,
// degenerate probe sets).
struct DegenerateDataError : std::runtime_error {
    explicit DegenerateDataError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace entsim
