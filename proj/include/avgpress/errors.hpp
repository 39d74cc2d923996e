#pragma once

#include <stdexcept>
#include <string>

namespace avgpress {

// Base of every error raised by the library. The CLI maps ParameterError and
// ParseError to exit code 1 and NumericError (and subclasses) to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A contributing eigenvalue sits (numerically) on an endpoint of the frequency
// range, so the log term of the objective is undefined.
class PoleAtEndpoint : public NumericError {
 public:
  PoleAtEndpoint(double kappa, double gap)
      : NumericError("eigenvalue " + std::to_string(kappa) +
                     " is within " + std::to_string(gap) +
                     " of a frequency-range endpoint; perturb the geometry or "
                     "the range"),
        kappa_(kappa),
        gap_(gap) {}
  double kappa() const { return kappa_; }
  double gap() const { return gap_; }

 private:
  double kappa_;
  double gap_;
};

class LemmaHypothesisViolated : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace avgpress
