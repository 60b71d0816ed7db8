#pragma once

#include <stdexcept>
#include <string>

namespace nncomp {

/// Base of every error raised by the library. `what()` carries the full
/// message including any layer/record context added while unwinding.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NNCOMP_DEFINE_ERROR(Name) \
  class Name : public Error {     \
   public:                        \
    using Error::Error;           \
  }

NNCOMP_DEFINE_ERROR(FormatError);      // wrong magic / version
NNCOMP_DEFINE_ERROR(CorruptionError);  // truncated data, bad checksum, bad index
NNCOMP_DEFINE_ERROR(ManifestError);    // structurally invalid manifest
NNCOMP_DEFINE_ERROR(ArgumentError);    // caller passed an invalid value
NNCOMP_DEFINE_ERROR(ConfigError);      // bad spec / plan / NIP configuration
NNCOMP_DEFINE_ERROR(ShapeError);       // tensor or feature map shape mismatch
NNCOMP_DEFINE_ERROR(PlanError);        // tying plan incompatible with network
NNCOMP_DEFINE_ERROR(IoError);          // filesystem failures
NNCOMP_DEFINE_ERROR(DegenerateError);  // statistics undefined for the input

#undef NNCOMP_DEFINE_ERROR

/// Rethrows `e` as the same dynamic error type with `context` prepended.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

}  // namespace nncomp
