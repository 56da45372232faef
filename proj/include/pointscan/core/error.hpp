#pragma once

#include <stdexcept>
#include <string>

namespace pointscan {

// Error taxonomy shared by the library and the CLI. The CLI maps each family
// to a fixed exit code, so every throw site picks the class by failure kind:
//   ConfigError / ArgError  -> bad flags, bad config keys, invalid hyperparameters
//   ParseError / DataError  -> unreadable files, malformed clouds, bad checkpoints
//   NumericError            -> non-finite values surfacing inside computations
//   DimError                -> tensor shape mismatches (a programming error)

struct ArgError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace pointscan
