#pragma once

#include <stdexcept>
#include <string>

namespace apprl {

// Error taxonomy mirrors the CLI exit codes: config -> 2, checkpoint -> 3,
// report schema -> 4. Everything else is a plain runtime_error.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace apprl
