#pragma once

#include <stdexcept>
#include <string>

namespace smcsynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class InvalidSimplexPoint : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// The LMI conditions admit no strictly feasible point.
class SynthesisInfeasible : public Error {
public:
    SynthesisInfeasible(const std::string& what, double best_margin)
        : Error(what), best_margin_(best_margin) {}

    /// Smallest phase-I shift that was reached; positive means infeasible.
    double best_margin() const noexcept { return best_margin_; }

private:
    double best_margin_;
};

}  // namespace smcsynth
