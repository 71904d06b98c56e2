#ifndef BOEM_ERRORS_HPP
#define BOEM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace boem {

enum class ErrorCode {
  NonStochasticRow,
  NonPositiveVariance,
  DimensionMismatch,
  IndexOutOfRange,
  InvalidLength,
  DegenerateLikelihood,
  IndexMismatch,
  EmptyBlock,
  TooLarge,
  InvalidSchedule,
  DegenerateState,
  DegenerateVariance,
  StreamExhausted,
  InsufficientSpan,
  NotConverged,
  UsageError,
  IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace boem

#endif  // BOEM_ERRORS_HPP
