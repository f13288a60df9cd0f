#pragma once

#include "obeam/geometry.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace obeam {

enum class DeltaRule { EqualEpsilon, Power67, Fixed };

std::string_view to_string(DeltaRule r);

struct ObstacleSpec {
    std::string shape = "none";  // none | sphere | ellipsoid | superellipsoid
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
    Vec3 semi_axes = Vec3::Ones();
    int exponent = 4;

    [[nodiscard]] std::optional<ConvexBody> build() const;
};

struct MonitorToggles {
    bool energy = true;
    bool morawetz = true;
    bool local_smoothing = true;
    bool strichartz = true;
    bool heat = true;
    bool dumps = true;
};

/// Parsed from an INI file; the [params] section carries scenario knobs
/// that only one scenario reads.
struct ScenarioConfig {
    std::string name;
    std::string scenario;  // s1 .. s6 or calibration
    ObstacleSpec obstacle;
    std::vector<double> epsilon_ladder;
    DeltaRule delta_rule = DeltaRule::Power67;
    double delta_fixed = 0.0;
    bool relaxed = true;
    int grid_n = 96;
    double points_per_sigma = 6.0;
    double horizon = 0.0;  // 0: scenario default
    double dt = 0.0;       // 0: scenario default
    double kappa = 0.1;
    double clearance = 0.1;
    MonitorToggles monitors;
    std::string constants;  // frozen monitor constants file; empty: calibrate in process
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    std::map<std::string, double> params;
    std::string source;  // path the config was read from, if any

    [[nodiscard]] double delta_for(double epsilon) const;
    [[nodiscard]] double param(const std::string& key, double fallback) const;
    /// Throws Config on any inconsistent field.
    void validate() const;
};

ScenarioConfig parse_config(std::istream& in, const std::string& source = "<stream>");
ScenarioConfig load_config(const std::string& path);

/// Constants fitted on the calibration scenario and reused unchanged.
struct FrozenConstants {
    double morawetz = 0.0;
    double local_smoothing = 0.0;
    double heat_exponent = 0.0;   // c in e^{-c |x - y|^2 / t}
    double heat_prefactor = 0.0;
    double headroom = 2.0;
    std::string fitted_on;
};

void write_constants(const std::string& path, const FrozenConstants& c);
FrozenConstants read_constants(const std::string& path);

}  // namespace obeam
