#pragma once

#include <stdexcept>
#include <string>

namespace tpp {

// Exit-code conventions for the CLI: 2 usage, 3 data, 4 numeric failure.
struct Error : std::runtime_error {
  Error(std::string msg, int code) : std::runtime_error(std::move(msg)), exit_code(code) {}
  int exit_code;
};

struct UsageError : Error {
  explicit UsageError(std::string msg) : Error(std::move(msg), 2) {}
};
struct ConfigError : UsageError {
  explicit ConfigError(std::string msg) : UsageError(std::move(msg)) {}
};

struct DataError : Error {
  explicit DataError(std::string msg) : Error(std::move(msg), 3) {}
};
struct ParseError : DataError {
  explicit ParseError(std::string msg) : DataError(std::move(msg)) {}
};
struct SchemaError : DataError {
  explicit SchemaError(std::string msg) : DataError(std::move(msg)) {}
};
struct EmptyDataset : DataError {
  explicit EmptyDataset(std::string msg = "dataset contains no sequences") : DataError(std::move(msg)) {}
};
struct SplitError : DataError {
  explicit SplitError(std::string msg) : DataError(std::move(msg)) {}
};
struct RescaleError : DataError {
  explicit RescaleError(std::string msg) : DataError(std::move(msg)) {}
};
struct EmptyEval : DataError {
  explicit EmptyEval(std::string msg = "no events to evaluate") : DataError(std::move(msg)) {}
};
struct DomainError : DataError {
  explicit DomainError(std::string msg) : DataError(std::move(msg)) {}
};

struct NumericError : Error {
  explicit NumericError(std::string msg) : Error(std::move(msg), 4) {}
};
struct NonFiniteLoss : NumericError {
  explicit NonFiniteLoss(std::string msg = "loss is not finite") : NumericError(std::move(msg)) {}
};
struct NonFiniteGradient : NumericError {
  explicit NonFiniteGradient(std::string msg = "gradient is not finite") : NumericError(std::move(msg)) {}
};
struct SamplerDiverged : NumericError {
  explicit SamplerDiverged(std::string msg = "sampler produced non-finite state") : NumericError(std::move(msg)) {}
};

}  // namespace tpp
