#pragma once

#include <stdexcept>
#include <string>

namespace motorid {

// Error categories map onto the CLI exit codes: validation -> 1,
// numerical -> 2, I/O -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Simulation state left the finite range.
class IntegrationDivergedError : public NumericalError {
public:
    IntegrationDivergedError(const std::string& msg, double t)
        : NumericalError(msg), t_diverged(t) {}
    double t_diverged;
};

// Requested friction quantity undefined for the given model kind.
class UnsupportedModelError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Regression design matrix lost rank on the active column set.
class RankDeficiencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Iterative solver ran out of iterations before meeting its tolerance.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& msg, double gap)
        : NumericalError(msg), final_gap(gap) {}
    double final_gap;
};

// Constant-voltage run never met the steady-state band inside the budget.
class SettlingTimeoutError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Pre-sliding initialization could not be read off the supplied ramp data.
class InitFailedError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Static curve fit attempted on data that cannot constrain the parameters.
class IllPosedFitError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Low-energy selection came back empty or degenerate.
class ExtractionDegenerateError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace motorid
