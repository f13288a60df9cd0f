#pragma once

#include "obeam/config.hpp"
#include "obeam/monitors.hpp"

#include <map>
#include <string>
#include <vector>

namespace obeam {

/// Outcome of one scenario. `checks` are the attached acceptance checks;
/// `monitors` are run-health flags (box leakage, solver stats) that only
/// fail the run under --strict.
struct ScenarioReport {
    std::string name;
    std::string scenario;
    std::vector<BoundCheck> checks;
    std::vector<BoundCheck> monitors;
    std::map<std::string, double> metrics;
    std::vector<std::string> files;

    [[nodiscard]] bool pass(bool strict = false) const;
    [[nodiscard]] double metric(const std::string& key) const;
};

/// Runs the scenario named by cfg.scenario and writes its artifacts under
/// cfg.output_dir. Monitor checks of s1 and s6 use `frozen` when given,
/// else cfg.constants, else throw Config.
ScenarioReport run_scenario(const ScenarioConfig& cfg, const FrozenConstants* frozen = nullptr);

/// Independent scenarios on up to `workers` threads; results come back in
/// input order and match a serial run.
std::vector<ScenarioReport> run_scenarios(const std::vector<ScenarioConfig>& cfgs, unsigned workers,
                                          const FrozenConstants* frozen = nullptr);

/// Fits the monitor constants on a calibration report (scaled by headroom).
FrozenConstants constants_from(const ScenarioReport& calibration, double headroom = 2.0);

/// Semi-analytic ||e^{it Delta_H} psi - e^{it Delta} psi||_{L^{10/3}(R x R^3)} for
/// psi a centred Gaussian (|psi|^2 standard deviation s0) at height d above
/// the plane, and the matching norm of the free evolution.
struct HalfspaceGap {
    double difference = 0.0;
    double free_norm = 0.0;
};
HalfspaceGap halfspace_free_gap(double s0, double d);

}  // namespace obeam
