#pragma once
#include <stdexcept>
#include <string>

namespace ddss {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mis-shaped or unsupported operands; message names the op and shapes.
struct ShapeError : Error { using Error::Error; };
// Numeric-domain violations (inadmissible sigma, bad schedule values, ...).
struct DomainError : Error { using Error::Error; };
// x0-prediction attempted where the marginal signal coefficient vanishes.
struct SingularityError : Error { using Error::Error; };
// Checkpointed recipe replay produced different bytes than the recording.
struct IntegrityError : Error { using Error::Error; };
// Sampler-parameter initialization target outside its transform's range.
struct InitError : Error { using Error::Error; };
// Config file problems: parse errors, unknown keys, invalid values.
struct ConfigError : Error { using Error::Error; };
// Model/sampler artifacts that do not belong together.
struct FingerprintError : Error { using Error::Error; };
// Filesystem / serialization failures.
struct IoError : Error { using Error::Error; };
// Command-line misuse that is not a config-file problem.
struct UsageError : Error { using Error::Error; };

}  // namespace ddss
