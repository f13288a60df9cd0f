#include "obeam/config.hpp"

#include "obeam/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace obeam {

namespace pt = boost::property_tree;

std::string_view to_string(DeltaRule r) {
    switch (r) {
        case DeltaRule::EqualEpsilon: return "equal_epsilon";
        case DeltaRule::Power67: return "power_6_7";
        case DeltaRule::Fixed: return "fixed";
    }
    return "?";
}

std::optional<ConvexBody> ObstacleSpec::build() const {
    if (shape == "none") return std::nullopt;
    if (shape == "sphere") return make_sphere(center, radius);
    if (shape == "ellipsoid") return make_ellipsoid(center, semi_axes);
    if (shape == "superellipsoid") return make_superellipsoid(center, semi_axes, exponent);
    throw Error(ErrorKind::Config, "unknown obstacle shape '" + shape + "'");
}

double ScenarioConfig::delta_for(double eps) const {
    switch (delta_rule) {
        case DeltaRule::EqualEpsilon: return eps;
        case DeltaRule::Power67: return std::pow(eps, 6.0 / 7.0);
        case DeltaRule::Fixed: return delta_fixed;
    }
    return eps;
}

double ScenarioConfig::param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void ScenarioConfig::validate() const {
    static const std::set<std::string> known{"s1", "s2", "s3", "s4", "s5", "s6", "calibration"};
    auto fail = [&](const std::string& what) { throw Error(ErrorKind::Config, name + ": " + what); };
    if (!known.count(scenario)) fail("unknown scenario '" + scenario + "'");
    for (std::size_t i = 0; i < epsilon_ladder.size(); ++i) {
        const double e = epsilon_ladder[i];
        if (!(e > 0.0 && e < 1.0)) fail("ladder entries must lie in (0, 1)");
        if (i > 0 && !(e < epsilon_ladder[i - 1])) fail("epsilon ladder must be strictly decreasing");
        if (delta_rule == DeltaRule::Fixed && delta_fixed < e) fail("fixed delta must be >= every epsilon");
    }
    if (delta_rule == DeltaRule::Fixed && !(delta_fixed > 0.0)) fail("fixed delta must be positive");
    if (grid_n < 8) fail("grid.n must be >= 8");
    if (!(points_per_sigma > 0.0)) fail("grid.points_per_sigma must be positive");
    if (horizon < 0.0 || dt < 0.0) fail("time.horizon and time.dt must be non-negative");
    if (!(kappa > 0.0 && kappa < 1.0) || !(clearance > 0.0 && clearance < 1.0))
        fail("thresholds must lie in (0, 1)");
    if (obstacle.shape != "none") (void)obstacle.build();
    if (output_dir.empty()) fail("output.dir must not be empty");
}

namespace {

std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::string tok;
    std::istringstream in(s);
    while (in >> tok) {
        if (tok == ",") continue;
        if (tok.back() == ',') tok.pop_back();
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Config, "bad number '" + tok + "' in " + key);
        }
    }
    return out;
}

Vec3 parse_vec3(const std::string& s, const std::string& key) {
    auto v = parse_list(s, key);
    if (v.size() != 3) throw Error(ErrorKind::Config, key + " needs three numbers");
    return {v[0], v[1], v[2]};
}

template <class T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
    try {
        return tree.get<T>(key, fallback);
    } catch (const pt::ptree_error& e) {
        throw Error(ErrorKind::Config, key + ": " + e.what());
    }
}

}  // namespace

ScenarioConfig parse_config(std::istream& in, const std::string& source) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::Config, source + ": " + e.what());
    }
    ScenarioConfig c;
    c.source = source;
    c.scenario = get<std::string>(tree, "scenario.kind", "");
    c.name = get<std::string>(tree, "scenario.name", c.scenario);
    c.seed = get<std::uint64_t>(tree, "scenario.seed", 1);

    c.obstacle.shape = get<std::string>(tree, "obstacle.shape", "none");
    c.obstacle.center = parse_vec3(get<std::string>(tree, "obstacle.center", "0 0 0"), "obstacle.center");
    c.obstacle.radius = get<double>(tree, "obstacle.radius", 1.0);
    c.obstacle.semi_axes = parse_vec3(get<std::string>(tree, "obstacle.semi_axes", "1 1 1"), "obstacle.semi_axes");
    c.obstacle.exponent = get<int>(tree, "obstacle.exponent", 4);

    c.epsilon_ladder = parse_list(get<std::string>(tree, "ladder.epsilon", ""), "ladder.epsilon");
    const std::string rule = get<std::string>(tree, "ladder.delta_rule", "power_6_7");
    if (rule == "equal_epsilon") {
        c.delta_rule = DeltaRule::EqualEpsilon;
    } else if (rule == "power_6_7") {
        c.delta_rule = DeltaRule::Power67;
    } else if (rule == "fixed") {
        c.delta_rule = DeltaRule::Fixed;
        c.delta_fixed = get<double>(tree, "ladder.delta", 0.0);
    } else {
        throw Error(ErrorKind::Config, "unknown delta_rule '" + rule + "'");
    }
    c.relaxed = get<bool>(tree, "ladder.relaxed", true);

    c.grid_n = get<int>(tree, "grid.n", 96);
    c.points_per_sigma = get<double>(tree, "grid.points_per_sigma", 6.0);
    c.horizon = get<double>(tree, "time.horizon", 0.0);
    c.dt = get<double>(tree, "time.dt", 0.0);
    c.kappa = get<double>(tree, "thresholds.kappa", 0.1);
    c.clearance = get<double>(tree, "thresholds.clearance", 0.1);

    c.monitors.energy = get<bool>(tree, "monitors.energy", true);
    c.monitors.morawetz = get<bool>(tree, "monitors.morawetz", true);
    c.monitors.local_smoothing = get<bool>(tree, "monitors.local_smoothing", true);
    c.monitors.strichartz = get<bool>(tree, "monitors.strichartz", true);
    c.monitors.heat = get<bool>(tree, "monitors.heat", true);
    c.monitors.dumps = get<bool>(tree, "monitors.dumps", true);
    c.constants = get<std::string>(tree, "monitors.constants", "");
    if (!c.constants.empty() && source != "<stream>") {
        std::filesystem::path p(c.constants);
        if (p.is_relative()) c.constants = (std::filesystem::path(source).parent_path() / p).string();
    }

    c.output_dir = get<std::string>(tree, "output.dir", "out/" + c.name);

    if (auto ps = tree.get_child_optional("params")) {
        for (const auto& [key, node] : *ps) {
            auto v = parse_list(node.data(), "params." + key);
            if (v.size() != 1) throw Error(ErrorKind::Config, "params." + key + " must be one number");
            c.params[key] = v[0];
        }
    }
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path);
    return parse_config(in, path);
}

void write_constants(const std::string& path, const FrozenConstants& c) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    char buf[256];
    out << "[constants]\n";
    std::snprintf(buf, sizeof buf,
                  "morawetz = %.17g\nlocal_smoothing = %.17g\nheat_exponent = %.17g\nheat_prefactor = %.17g\n"
                  "headroom = %.17g\n",
                  c.morawetz, c.local_smoothing, c.heat_exponent, c.heat_prefactor, c.headroom);
    out << buf << "fitted_on = " << c.fitted_on << "\n";
    if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

FrozenConstants read_constants(const std::string& path) {
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::Io, e.what());
    }
    FrozenConstants c;
    c.morawetz = get<double>(tree, "constants.morawetz", 0.0);
    c.local_smoothing = get<double>(tree, "constants.local_smoothing", 0.0);
    c.heat_exponent = get<double>(tree, "constants.heat_exponent", 0.0);
    c.heat_prefactor = get<double>(tree, "constants.heat_prefactor", 0.0);
    c.headroom = get<double>(tree, "constants.headroom", 2.0);
    c.fitted_on = get<std::string>(tree, "constants.fitted_on", "");
    if (!(c.morawetz > 0.0) || !(c.local_smoothing > 0.0) || !(c.heat_exponent > 0.0) || !(c.heat_prefactor > 0.0))
        throw Error(ErrorKind::Config, path + ": constants must be positive");
    return c;
}

}  // namespace obeam
