#pragma once

#include <stdexcept>
#include <string>

namespace magneto {

// Base of every error raised by the library. Subclasses name the failure
// category so callers (and the CLI) can map them to messages or exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error { public: using Error::Error; };
class InputError : public Error { public: using Error::Error; };
class SamplingError : public Error { public: using Error::Error; };
class CoverageError : public Error { public: using Error::Error; };
class ConflictError : public Error { public: using Error::Error; };
class NotFoundError : public Error { public: using Error::Error; };
class ContractError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };

} // namespace magneto
