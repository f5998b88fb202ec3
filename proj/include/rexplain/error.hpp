#pragma once

#include <stdexcept>
#include <string>

namespace rexplain {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (JSONL line, config file, checkpoint).
class ParseError : public Error {
public:
  ParseError(const std::string& msg) : Error(msg) {}
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_ = 0;
};

// Dangling reference between corpus records.
class IntegrityError : public Error {
public:
  using Error::Error;
};

// A user cannot be split into train/test.
class SplitError : public Error {
public:
  using Error::Error;
};

// No unobserved item left to sample for a user.
class ExhaustionError : public Error {
public:
  using Error::Error;
};

// Remote reward/embedding call failed after all retries.
class ProviderError : public Error {
public:
  using Error::Error;
};

// The preference constraints admit no point on the simplex.
class InfeasibleError : public Error {
public:
  using Error::Error;
};

// Invalid configuration; message carries the offending field path.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
  using Error::Error;
};

// A statistic is undefined on the given input (e.g. zero-variance ranks).
class MetricError : public Error {
public:
  using Error::Error;
};

}  // namespace rexplain
