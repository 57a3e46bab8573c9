#pragma once

#include <stdexcept>
#include <string>

namespace qtel {

/// Input data is malformed or inconsistent (bad CSV, hash mismatch, ...).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Scenario/config file is invalid (unknown key, missing key, bad value).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A model fit did not converge or the data is degenerate for fitting.
struct FitError : std::runtime_error {
    explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Not enough samples/events in a selection to produce an estimate.
struct InsufficientDataError : std::runtime_error {
    explicit InsufficientDataError(const std::string& msg)
        : std::runtime_error(msg) {}
};

/// Population estimates are inverted (p_upper >= p_lower): no positive
/// temperature reproduces them.
struct NonthermalInversionError : std::domain_error {
    explicit NonthermalInversionError(const std::string& msg)
        : std::domain_error(msg) {}
};

/// Requested excited-state probability has no finite bath occupation.
struct NoSolutionError : std::domain_error {
    explicit NoSolutionError(const std::string& msg) : std::domain_error(msg) {}
};

/// gamma_up >= gamma_down: the detailed-balance decomposition would need a
/// negative coupling (population inversion).
struct InvertedBathError : std::domain_error {
    explicit InvertedBathError(const std::string& msg)
        : std::domain_error(msg) {}
};

} // namespace qtel
