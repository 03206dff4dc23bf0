#pragma once

#include <stdexcept>
#include <string>

namespace knadi {

// Base class for every failure this library reports on purpose. kind() gives
// a stable machine-readable tag for CLI error lines.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define KNADI_ERROR_TYPE(Name)                                    \
    struct Name : Error {                                         \
        using Error::Error;                                       \
        const char* kind() const noexcept override { return #Name; } \
    }

KNADI_ERROR_TYPE(DimensionMismatch);
KNADI_ERROR_TYPE(NotSymmetric);
KNADI_ERROR_TYPE(SingularSaddlePoint);
KNADI_ERROR_TYPE(FactorizationFailed);
KNADI_ERROR_TYPE(SmwSingular);
KNADI_ERROR_TYPE(ArnoldiBreakdown);
KNADI_ERROR_TYPE(EmptyStableSet);
KNADI_ERROR_TYPE(TooLarge);
KNADI_ERROR_TYPE(NotStabilizable);
KNADI_ERROR_TYPE(MaxIterations);
KNADI_ERROR_TYPE(NotStabilizing);
KNADI_ERROR_TYPE(NoAdmissibleStep);
KNADI_ERROR_TYPE(ParseError);
KNADI_ERROR_TYPE(UnsupportedField);
KNADI_ERROR_TYPE(InvalidSpec);

#undef KNADI_ERROR_TYPE

// Inner-iteration failure; the reason decides how the outer loop reacts.
struct NonConvergent : Error {
    enum class Reason { growth, max_steps };
    Reason reason;
    NonConvergent(Reason r, const std::string& what) : Error(what), reason(r) {}
    const char* kind() const noexcept override { return "NonConvergent"; }
};

}  // namespace knadi
