#pragma once

#include <stdexcept>
#include <string>

namespace dealias {

enum class ErrorKind {
  kInvalidArgument,
  kUnsupportedConfiguration,
  kConfiguration,
  kNotAWeightFile,
  kCorruptWeights,
  kUndefinedMetric,
  kIo,
  kNumeric,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define DEALIAS_DEFINE_ERROR(Name, Kind)                          \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(Kind, what) {} \
  };

DEALIAS_DEFINE_ERROR(InvalidArgument, ErrorKind::kInvalidArgument)
DEALIAS_DEFINE_ERROR(UnsupportedConfiguration, ErrorKind::kUnsupportedConfiguration)
DEALIAS_DEFINE_ERROR(ConfigurationError, ErrorKind::kConfiguration)
DEALIAS_DEFINE_ERROR(NotAWeightFile, ErrorKind::kNotAWeightFile)
DEALIAS_DEFINE_ERROR(CorruptWeights, ErrorKind::kCorruptWeights)
DEALIAS_DEFINE_ERROR(UndefinedMetric, ErrorKind::kUndefinedMetric)
DEALIAS_DEFINE_ERROR(IoError, ErrorKind::kIo)
DEALIAS_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)

#undef DEALIAS_DEFINE_ERROR

}  // namespace dealias
