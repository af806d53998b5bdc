#pragma once

#include <stdexcept>
#include <string>

namespace framemae {

// Every failure raised by the library derives from Error; the category drives
// the CLI exit code.
enum class ErrorKind {
  kConfig = 2,
  kUsage = 3,
  kFormat = 4,
  kTraining = 5,
  kSampling = 6,
  kScoring = 7,
  kCheckpoint = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  const char* category() const noexcept {
    switch (kind_) {
      case ErrorKind::kConfig: return "config error";
      case ErrorKind::kUsage: return "usage error";
      case ErrorKind::kFormat: return "format error";
      case ErrorKind::kTraining: return "training error";
      case ErrorKind::kSampling: return "sampling error";
      case ErrorKind::kScoring: return "scoring error";
      case ErrorKind::kCheckpoint: return "checkpoint error";
    }
    return "error";
  }

 private:
  ErrorKind kind_;
};

#define FRAMEMAE_DEFINE_ERROR(Name, Kind)                  \
  class Name : public Error {                              \
   public:                                                 \
    explicit Name(const std::string& what)                 \
        : Error(ErrorKind::Kind, what) {}                  \
  };

FRAMEMAE_DEFINE_ERROR(ConfigError, kConfig)
FRAMEMAE_DEFINE_ERROR(UsageError, kUsage)
FRAMEMAE_DEFINE_ERROR(FormatError, kFormat)
FRAMEMAE_DEFINE_ERROR(TrainingError, kTraining)
FRAMEMAE_DEFINE_ERROR(SamplingError, kSampling)
FRAMEMAE_DEFINE_ERROR(ScoringError, kScoring)
FRAMEMAE_DEFINE_ERROR(CheckpointError, kCheckpoint)

#undef FRAMEMAE_DEFINE_ERROR

}  // namespace framemae
