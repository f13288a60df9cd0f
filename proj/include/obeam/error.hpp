#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace obeam {

enum class ErrorKind {
    NonConvergence,
    DegenerateCurvature,
    NotEntering,
    InvalidScale,
    InvalidArgument,
    SupportViolation,
    WindowTooSmall,
    SingularSigma,
    ObstacleTouchesBoundary,
    SolverDivergence,
    OriginOutsideObstacle,
    Config,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI exit path) can dispatch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace obeam
