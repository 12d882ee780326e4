#pragma once

#include <stdexcept>
#include <string>

namespace fmc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or input violated a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An iterative solver hit its iteration cap or a singular system.
class SolverError : public Error {
public:
    using Error::Error;
};

/// No stationary policy meets the rejection-probability threshold.
class InfeasibleConstraint : public SolverError {
public:
    using SolverError::SolverError;
};

/// The simulator observed an infeasible action or a capacity violation.
class SimulationAbort : public Error {
public:
    using Error::Error;
};

} // namespace fmc
