#pragma once

#include <stdexcept>
#include <string>

namespace kpeval {

/// Failure classes, used by the CLI to pick distinct exit codes.
enum class ErrorCategory {
  InvalidArgument = 1,
  Parse = 2,
  Geometry = 3,
  Io = 4,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

private:
  ErrorCategory category_;
};

#define KPEVAL_DEFINE_ERROR(Name, Category)                                  \
  class Name : public Error {                                                \
  public:                                                                    \
    explicit Name(const std::string& message)                                \
        : Error(ErrorCategory::Category, std::string(#Name ": ") + message) {}\
  }

// geometry
KPEVAL_DEFINE_ERROR(DegenerateProjection, Geometry);
KPEVAL_DEFINE_ERROR(NonPositiveDefinite, Geometry);
KPEVAL_DEFINE_ERROR(ZeroArea, Geometry);

// masks
KPEVAL_DEFINE_ERROR(EmptySupport, Geometry);
KPEVAL_DEFINE_ERROR(EmptySet, Geometry);

// evaluation
KPEVAL_DEFINE_ERROR(EmptyCommonRegion, Geometry);

// matching
KPEVAL_DEFINE_ERROR(DimensionMismatch, InvalidArgument);
KPEVAL_DEFINE_ERROR(TooFewCandidates, InvalidArgument);

// io
KPEVAL_DEFINE_ERROR(MalformedHeader, Parse);
KPEVAL_DEFINE_ERROR(CountMismatch, Parse);
KPEVAL_DEFINE_ERROR(NonNumericToken, Parse);
KPEVAL_DEFINE_ERROR(Singular, Parse);
KPEVAL_DEFINE_ERROR(MalformedMatrix, Parse);
KPEVAL_DEFINE_ERROR(ManifestError, Parse);
KPEVAL_DEFINE_ERROR(InsufficientDetectors, InvalidArgument);
KPEVAL_DEFINE_ERROR(IoFailure, Io);

// configuration
KPEVAL_DEFINE_ERROR(InvalidParameter, InvalidArgument);

#undef KPEVAL_DEFINE_ERROR

}  // namespace kpeval
