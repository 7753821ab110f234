#ifndef EIT_COMMON_HPP
#define EIT_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace eit {

// Error taxonomy. The CLI maps these onto process exit codes
// (parameter/config -> 2, numerical -> 3, I/O -> 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// Raised when a mesh or layout invariant fails; the message names the invariant.
class ValidationError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Config-file errors carry the offending field path in the message.
class ConfigError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// FNV-1a, used for config / node-map hashes embedded in output files.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(const std::string& s);
std::string hash_hex(std::uint64_t h);

// Shortest round-trip-exact decimal form ("%.17g" trimmed), used by every
// text artifact so that reruns are byte-identical.
std::string format_double(double v);

// Deterministic standard-normal stream (explicit Box-Muller over mt19937_64,
// independent of the standard library's unspecified normal_distribution).
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}
  double next();

 private:
  double uniform01();  // in (0, 1]
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace eit

#endif
