#pragma once

#include <stdexcept>
#include <string>

namespace logitmix {

// Shape mismatch between tensors (wrong dims, empty input, non-scalar root).
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad caller-supplied data: out-of-range token id, overlong context, etc.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or unknown config key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API contract violated (e.g. gradient step on a frozen policy).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Math domain violation (e.g. log of a zero probability).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace logitmix
