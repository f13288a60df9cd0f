#pragma once

#include "obeam/monitors.hpp"

#include <vector>

namespace obeam {

/// Fast invariant suite. Each check reports lhs (observed defect) against
/// rhs (tolerance); a failing check names the broken invariant.
struct DoctorReport {
    std::vector<BoundCheck> checks;
    double seconds = 0.0;
    [[nodiscard]] bool pass() const;
};

DoctorReport doctor();

/// Largest relative defect among the identities a curvature matrix obeys:
/// B eta = 0, -tr B = |l1| + |l2|, l1 l2 = 16 |xi|^2 / (R1 R2), both l < 0.
/// Exposed so mutated matrices can be fed through the same check.
double curvature_identity_defect(const Mat3& B, const Vec3& xi_frame, double R1, double R2);

}  // namespace obeam
