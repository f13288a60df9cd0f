#include "obeam/error.hpp"

namespace obeam {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::DegenerateCurvature: return "DegenerateCurvature";
        case ErrorKind::NotEntering: return "NotEntering";
        case ErrorKind::InvalidScale: return "InvalidScale";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::SupportViolation: return "SupportViolation";
        case ErrorKind::WindowTooSmall: return "WindowTooSmall";
        case ErrorKind::SingularSigma: return "SingularSigma";
        case ErrorKind::ObstacleTouchesBoundary: return "ObstacleTouchesBoundary";
        case ErrorKind::SolverDivergence: return "SolverDivergence";
        case ErrorKind::OriginOutsideObstacle: return "OriginOutsideObstacle";
        case ErrorKind::Config: return "Config";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace obeam
