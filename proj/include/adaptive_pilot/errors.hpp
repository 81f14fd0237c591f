#pragma once

#include <stdexcept>
#include <string>

namespace adaptive_pilot {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ADAPTIVE_PILOT_ERROR(Name)            \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

ADAPTIVE_PILOT_ERROR(DimensionMismatch);
ADAPTIVE_PILOT_ERROR(NonFiniteValue);
ADAPTIVE_PILOT_ERROR(NotHurwitz);
ADAPTIVE_PILOT_ERROR(NotStabilizable);
ADAPTIVE_PILOT_ERROR(NoConvergence);
ADAPTIVE_PILOT_ERROR(StepTooLarge);
ADAPTIVE_PILOT_ERROR(OutOfBounds);
ADAPTIVE_PILOT_ERROR(SingularDCGain);
ADAPTIVE_PILOT_ERROR(RangeNotLogged);
ADAPTIVE_PILOT_ERROR(EmptyWindow);
ADAPTIVE_PILOT_ERROR(ValidationError);

#undef ADAPTIVE_PILOT_ERROR

/// Raised when integration produces NaN/Inf. Carries the time and the signal.
class NonFiniteState : public Error {
public:
    NonFiniteState(double time, std::string signal)
        : Error("non-finite state at t=" + std::to_string(time) + " in " + signal),
          time_(time), signal_(std::move(signal)) {}

    double time() const noexcept { return time_; }
    const std::string& signal() const noexcept { return signal_; }

private:
    double time_;
    std::string signal_;
};

/// Config parse failure; `where` names the line or the dotted field.
class ParseError : public Error {
public:
    ParseError(const std::string& where, const std::string& what)
        : Error("parse error at " + where + ": " + what), where_(where) {}

    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

}  // namespace adaptive_pilot
