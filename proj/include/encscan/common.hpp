#pragma once

#include <stdexcept>
#include <string>

namespace encscan {

// Caller broke a documented precondition (bad shape, invalid config, ...).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numerically degenerate input where a direction or spread is required
// (zero vector fed to a cosine, single-cluster silhouette, ...).
struct DegenerateInputError : ContractError {
    using ContractError::ContractError;
};

// Malformed, truncated or mislabeled on-disk artifact.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An update produced or consumed a non-finite value. param_path names the
// offending tensor so the failure can be traced to a concrete parameter.
struct NonFiniteError : std::runtime_error {
    std::string param_path;
    NonFiniteError(const std::string& msg, std::string path)
        : std::runtime_error(msg), param_path(std::move(path)) {}
};

// Training could not proceed; carries the step at which it failed.
struct TrainingError : std::runtime_error {
    long long step;
    TrainingError(const std::string& msg, long long s)
        : std::runtime_error(msg), step(s) {}
};

}  // namespace encscan
