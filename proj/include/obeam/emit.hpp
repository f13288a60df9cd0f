#pragma once

#include "obeam/monitors.hpp"

#include <string>
#include <vector>

namespace obeam {

/// %.17g; nan and inf print as "nan", "inf", "-inf".
std::string format_double(double x);

/// Per-run scalars: t, mass, energy, F, potential_term. Missing series are
/// written as nan so the header never changes.
void emit_trace(const RunTrace& trace, const std::string& path);

/// Per-check reports: name, lhs, rhs, fitted_constant, pass.
void emit_checks(const std::vector<BoundCheck>& checks, const std::string& path);

/// Numeric table under a caller-chosen header.
void emit_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
                const std::string& path);

}  // namespace obeam
